//! Global VS addresses, node-local slot addresses and the bijection between them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::sync::RwLock;
use thiserror::Error;
use uuid::Uuid;

const SCHEME: &str = "vs://";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressError {
    #[error("malformed global address: {0}")]
    Malformed(String),
    #[error("invalid iaas id: {0:?}")]
    InvalidIaasId(String),
}

/// `vs://<iaas_id>/<uuid>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalAddress {
    iaas_id: String,
    vs_uuid: Uuid,
}

fn valid_iaas_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

impl GlobalAddress {
    pub fn new(iaas_id: &str, vs_uuid: Uuid) -> Result<Self, AddressError> {
        if !valid_iaas_id(iaas_id) {
            return Err(AddressError::InvalidIaasId(iaas_id.to_string()));
        }
        Ok(GlobalAddress {
            iaas_id: iaas_id.to_string(),
            vs_uuid,
        })
    }

    pub fn iaas_id(&self) -> &str {
        &self.iaas_id
    }

    pub fn vs_uuid(&self) -> Uuid {
        self.vs_uuid
    }
}

impl fmt::Display for GlobalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{SCHEME}{}/{}", self.iaas_id, self.vs_uuid.hyphenated())
    }
}

impl FromStr for GlobalAddress {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || AddressError::Malformed(s.to_string());
        let rest = s.strip_prefix(SCHEME).ok_or_else(malformed)?;
        let (iaas, uuid) = rest.split_once('/').ok_or_else(malformed)?;
        // only the canonical lowercase hyphenated form is accepted
        if uuid.len() != 36 || uuid.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(malformed());
        }
        let vs_uuid = Uuid::parse_str(uuid).map_err(|_| malformed())?;
        GlobalAddress::new(iaas, vs_uuid)
    }
}

impl Serialize for GlobalAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GlobalAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Slot on a node; the platform-local identity of a VS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LocalAddress {
    pub node_id: String,
    pub slot: u8,
}

impl LocalAddress {
    pub fn new(node_id: impl Into<String>, slot: u8) -> Self {
        LocalAddress {
            node_id: node_id.into(),
            slot,
        }
    }
}

impl fmt::Display for LocalAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.node_id, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindError {
    #[error("global address {0} is already bound")]
    GlobalBound(GlobalAddress),
    #[error("local address {0} is already occupied")]
    LocalOccupied(LocalAddress),
    #[error("global address {0} is not bound")]
    NotBound(GlobalAddress),
}

#[derive(Debug, Default, Clone)]
struct Bijection {
    forward: HashMap<GlobalAddress, LocalAddress>,
    backward: HashMap<LocalAddress, GlobalAddress>,
}

/// Shared global <-> local map. Every mutation happens under one write lock,
/// so readers never observe a half-applied rebind.
#[derive(Debug, Default)]
pub struct AddressMap {
    inner: RwLock<Bijection>,
}

impl AddressMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&self, g: GlobalAddress, l: LocalAddress) -> Result<(), BindError> {
        let mut m = self.inner.write().unwrap();
        if m.forward.contains_key(&g) {
            return Err(BindError::GlobalBound(g));
        }
        if m.backward.contains_key(&l) {
            return Err(BindError::LocalOccupied(l));
        }
        m.forward.insert(g.clone(), l.clone());
        m.backward.insert(l, g);
        Ok(())
    }

    pub fn unbind(&self, g: &GlobalAddress) -> Result<LocalAddress, BindError> {
        let mut m = self.inner.write().unwrap();
        let l = m
            .forward
            .remove(g)
            .ok_or_else(|| BindError::NotBound(g.clone()))?;
        m.backward.remove(&l);
        Ok(l)
    }

    /// Moves `g` to `new_l`, returning the local address it left.
    pub fn rebind_atomic(
        &self,
        g: &GlobalAddress,
        new_l: LocalAddress,
    ) -> Result<LocalAddress, BindError> {
        let mut m = self.inner.write().unwrap();
        if !m.forward.contains_key(g) {
            return Err(BindError::NotBound(g.clone()));
        }
        if m.backward.contains_key(&new_l) {
            return Err(BindError::LocalOccupied(new_l));
        }
        let old = m.forward.insert(g.clone(), new_l.clone()).unwrap();
        m.backward.remove(&old);
        m.backward.insert(new_l, g.clone());
        Ok(old)
    }

    pub fn resolve(&self, g: &GlobalAddress) -> Option<LocalAddress> {
        self.inner.read().unwrap().forward.get(g).cloned()
    }

    pub fn reverse(&self, l: &LocalAddress) -> Option<GlobalAddress> {
        self.inner.read().unwrap().backward.get(l).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted copy of all pairs.
    pub fn entries(&self) -> Vec<(GlobalAddress, LocalAddress)> {
        let m = self.inner.read().unwrap();
        let mut v: Vec<_> = m
            .forward
            .iter()
            .map(|(g, l)| (g.clone(), l.clone()))
            .collect();
        v.sort();
        v
    }

    /// True when the backward map is exactly the inverse of the forward map.
    pub fn is_bijective(&self) -> bool {
        let m = self.inner.read().unwrap();
        m.forward.len() == m.backward.len()
            && m.forward.iter().all(|(g, l)| m.backward.get(l) == Some(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: u128) -> GlobalAddress {
        GlobalAddress::new("lab", Uuid::from_u128(n)).unwrap()
    }

    #[test]
    fn bind_and_resolve() {
        let map = AddressMap::new();
        map.bind(g(1), LocalAddress::new("n1", 0)).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map.resolve(&g(1)), Some(LocalAddress::new("n1", 0)));
    }

    #[test]
    fn occupied_slot_rejected() {
        let map = AddressMap::new();
        map.bind(g(1), LocalAddress::new("n1", 0)).unwrap();
        assert_eq!(
            map.bind(g(2), LocalAddress::new("n1", 0)),
            Err(BindError::LocalOccupied(LocalAddress::new("n1", 0)))
        );
        assert!(matches!(
            map.bind(g(1), LocalAddress::new("n1", 1)),
            Err(BindError::GlobalBound(_))
        ));
    }

    #[test]
    fn rebind_frees_old_slot() {
        let map = AddressMap::new();
        map.bind(g(1), LocalAddress::new("n1", 0)).unwrap();
        let old = map
            .rebind_atomic(&g(1), LocalAddress::new("n2", 1))
            .unwrap();
        assert_eq!(old, LocalAddress::new("n1", 0));
        assert_eq!(map.resolve(&g(1)), Some(LocalAddress::new("n2", 1)));
        assert_eq!(map.reverse(&LocalAddress::new("n1", 0)), None);
        assert!(map.is_bijective());
    }

    #[test]
    fn rebind_unbound() {
        let map = AddressMap::new();
        assert_eq!(
            map.rebind_atomic(&g(9), LocalAddress::new("n1", 0)),
            Err(BindError::NotBound(g(9)))
        );
    }

    #[test]
    fn global_address_text_form() {
        let a = g(0xabcdef);
        let s = a.to_string();
        assert_eq!(s, "vs://lab/00000000-0000-0000-0000-000000abcdef");
        assert_eq!(s.parse::<GlobalAddress>().unwrap(), a);
        assert!("vs://lab/00000000-0000-0000-0000-000000ABCDEF"
            .parse::<GlobalAddress>()
            .is_err());
        assert!("http://lab/x".parse::<GlobalAddress>().is_err());
        assert!("vs:///00000000-0000-0000-0000-000000abcdef"
            .parse::<GlobalAddress>()
            .is_err());
    }
}
