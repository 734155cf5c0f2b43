//! Thin blocking client for the IaaS REST interface.

use std::time::Duration;

use reqwest::blocking::{Client as Http, RequestBuilder};
use reqwest::Method;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use vwsn_core::metrics::MetricsView;
use vwsn_core::model::VsView;
use vwsn_core::provisioning::CreateRequest;
use vwsn_core::registry::SensorView;

use crate::BenchError;

#[derive(Debug, Deserialize)]
struct ErrorBody {
    code: String,
    message: String,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: Http,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Result<Self, BenchError> {
        let http = Http::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| BenchError::ServiceUnreachable(e.to_string()))?;
        Ok(Client {
            base: base.into().trim_end_matches('/').to_string(),
            http,
        })
    }

    fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, BenchError> {
        let resp = req
            .send()
            .map_err(|e| BenchError::ServiceUnreachable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body: ErrorBody = resp
                .json()
                .map_err(|e| BenchError::Protocol(e.to_string()))?;
            return Err(BenchError::Api {
                status: status.as_u16(),
                code: body.code,
                message: body.message,
            });
        }
        if status == reqwest::StatusCode::NO_CONTENT {
            return serde_json::from_value(Value::Null)
                .map_err(|e| BenchError::Protocol(e.to_string()));
        }
        resp.json().map_err(|e| BenchError::Protocol(e.to_string()))
    }

    fn call<T: DeserializeOwned>(
        &self,
        method: Method,
        path: &str,
        body: Option<Value>,
    ) -> Result<T, BenchError> {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(b) = body {
            req = req.json(&b);
        }
        self.send(req)
    }

    pub fn sensors(&self, query: &[(&str, String)]) -> Result<Vec<SensorView>, BenchError> {
        let req = self
            .http
            .get(format!("{}/v1/sensors", self.base))
            .query(query);
        self.send(req)
    }

    pub fn create(&self, req: &CreateRequest) -> Result<VsView, BenchError> {
        let body = serde_json::to_value(req).expect("request serializes");
        self.call(Method::POST, "/v1/vs", Some(body))
    }

    pub fn start(&self, vs_id: &str) -> Result<VsView, BenchError> {
        self.call(Method::POST, &format!("/v1/vs/{vs_id}/start"), None)
    }

    pub fn stop(&self, vs_id: &str) -> Result<VsView, BenchError> {
        self.call(Method::POST, &format!("/v1/vs/{vs_id}/stop"), None)
    }

    pub fn delete(&self, vs_id: &str) -> Result<(), BenchError> {
        self.call(Method::DELETE, &format!("/v1/vs/{vs_id}"), None)
    }

    pub fn metrics(&self) -> Result<MetricsView, BenchError> {
        self.call(Method::GET, "/v1/metrics", None)
    }

    pub fn open_session(&self) -> Result<(), BenchError> {
        self.call::<Value>(Method::POST, "/v1/session", None)
            .map(drop)
    }

    pub fn close_session(&self) -> Result<(), BenchError> {
        self.call(Method::DELETE, "/v1/session", None)
    }

    pub fn now(&self) -> Result<u64, BenchError> {
        let v: Value = self.call(Method::GET, "/v1/clock", None)?;
        v["now_ms"]
            .as_u64()
            .ok_or_else(|| BenchError::Protocol("clock reply without now_ms".into()))
    }

    pub fn advance_to(&self, to_ms: u64) -> Result<(), BenchError> {
        self.call::<Value>(
            Method::POST,
            "/v1/clock/advance",
            Some(json!({ "to_ms": to_ms })),
        )
        .map(drop)
    }
}
