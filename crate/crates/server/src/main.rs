use rob2_core::config::Settings;
use rob2_server::{router, AppState};

#[tokio::main]
async fn main() {
    let settings = Settings::from_env();
    let bind = settings.bind.clone().unwrap_or_else(|| "127.0.0.1:8080".into());
    let state = match AppState::from_settings(settings) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("rob2-server: cannot open data directory: {e}");
            std::process::exit(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind(&bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("rob2-server: cannot bind {bind}: {e}");
            std::process::exit(2);
        }
    };
    eprintln!("rob2-server listening on {bind}");
    if let Err(e) = axum::serve(listener, router(state)).await {
        eprintln!("rob2-server: {e}");
        std::process::exit(1);
    }
}
