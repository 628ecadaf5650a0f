#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use quota_core::AuthContext;
use quota_service::rest::{AppState, BackgroundServer};
use quota_service::{QuotaService, Scanner};

pub const ADMIN_TOKEN: &str = "admin-secret";
pub const USER_TOKEN: &str = "alice-secret";

pub fn tokens() -> HashMap<String, AuthContext> {
    let mut t = HashMap::new();
    t.insert(ADMIN_TOKEN.to_string(), AuthContext::admin(ADMIN_TOKEN, 0, 0));
    t.insert(USER_TOKEN.to_string(), AuthContext::user(USER_TOKEN, 1000, 2000));
    t
}

pub fn app_state(service: Arc<QuotaService>) -> AppState {
    AppState::new(Arc::new(Scanner::new(service)), tokens())
}

pub fn serve(service: Arc<QuotaService>) -> BackgroundServer {
    BackgroundServer::start(app_state(service), "127.0.0.1:0".parse().unwrap()).unwrap()
}
