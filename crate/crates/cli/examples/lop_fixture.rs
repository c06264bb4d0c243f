//! Regenerates the acceptance fixture `lop_panel.csv`: a synthetic law-of-one-price
//! shaped panel with 48 items (28 goods, 20 services) in 51 cities observed
//! quarterly over 1990Q1..2007Q4 (N = 2448, T = 72).
//!
//! Services are drawn with higher persistence than goods, and two service
//! units are held constant so the degenerate-unit path is exercised.
//!
//! cargo run -p hetpanel --example lop_fixture -- crates/validation/tests/fixtures/lop_panel.csv

use hetpanel::io::{write_long_csv, ColumnMap};
use hetpanel_core::montecarlo::{covariance, simulate_unit, DgpConfig, ParamLaw};
use hetpanel_core::rng::{stream, Domain};
use hetpanel_core::{Panel, TimeId};

const GOODS: usize = 28;
const SERVICES: usize = 20;
const CITIES: usize = 51;
const SEED: u64 = 1990;

fn law(mean: [f64; 3], sd: [f64; 3]) -> ParamLaw {
    let config = DgpConfig { mean, cov: covariance(sd, [0.1, 0.0, 0.2]), ..DgpConfig::default() };
    ParamLaw::new(&config).expect("valid design")
}

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "lop_panel.csv".into());
    let goods = law([-0.042, 0.025, 0.60], [0.12, 0.015, 0.16]);
    let services = law([-0.030, 0.020, 0.78], [0.14, 0.012, 0.12]);
    let periods: Vec<TimeId> = (1990..=2007)
        .flat_map(|y| (1..=4).map(move |q| TimeId::Label(format!("{y}Q{q}"))))
        .collect();
    let t = periods.len();

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (group, (prefix, items, law)) in [("goods", GOODS, &goods), ("services", SERVICES, &services)].into_iter().enumerate() {
        for item in 1..=items {
            for city in 1..=CITIES {
                let mut rng = stream(SEED, Domain::UnitSimulation, group as u64, (item * 1000 + city) as u64);
                let p = law.sample(&mut rng);
                let series = if prefix == "services" && item == SERVICES && city <= 2 {
                    vec![p.location; t]
                } else {
                    simulate_unit(&p, t, &mut rng)
                };
                ids.push(format!("{prefix}_i{item:02}_c{city:02}"));
                rows.push(series.iter().map(|v| (v * 1e5).round() / 1e5).collect());
            }
        }
    }
    let panel = Panel::new(ids, periods, rows).expect("balanced panel");
    write_long_csv(&panel, std::path::Path::new(&path), &ColumnMap::default()).expect("write fixture");
    eprintln!("wrote {} units x {} periods to {path}", panel.n_units(), panel.n_periods());
}
