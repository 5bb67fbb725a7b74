//! Builds a small bundle and serves it.
//!
//! ```text
//! cargo run --release --example serve_model -- 127.0.0.1:8080
//! curl -s localhost:8080/predict -d '{"t_ambient":293,"htc":269,"slices":[20]}'
//! ```

use calibrom::interface::http::serve;
use calibrom::rom::{build_rom, generate_split, Split};
use calibrom::RomConfig;

fn main() -> calibrom::Result<()> {
    let addr = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:8080".into())
        .parse()
        .expect("socket address");
    let cfg = RomConfig::preset("smoke")?;
    let fom = cfg.full_order_model()?;
    let train = generate_split(&fom, &cfg, Split::Train)?;
    let validation = generate_split(&fom, &cfg, Split::Validation)?;
    let bundle = build_rom(&cfg, &train, &validation)?.bundle;
    tokio::runtime::Runtime::new()
        .expect("runtime")
        .block_on(serve(bundle, addr, None))
}
