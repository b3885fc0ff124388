//! Seeded synthetic corpus: results, receipts and overrides files, a config, and a response
//! cache holding every pageview and TV-mention reply the pipeline will ask for. Vote shares
//! follow a planted linear model in the realized pageview ratio, so fitted coefficients can
//! be checked against known values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal, Poisson};
use serde::Serialize;
use serde_json::json;

use crate::ingest::{election_day, Chamber, DateWindow, Fetcher, ResponseCache};
use crate::pipeline::PipelineError;

/// Intercept for incumbents.
pub const PLANTED_ALPHA: f64 = 0.32;
/// Pageview-ratio slope for incumbents.
pub const PLANTED_BETA: f64 = 0.18;
/// Shift for challengers.
pub const PLANTED_GAMMA: f64 = -0.02;
/// Extra pageview-ratio slope for challengers.
pub const PLANTED_INTERACTION: f64 = 0.15;

/// Slope of vote share on pageview ratio alone. With 20% open seats, 60% of candidates are
/// challengers and ratio is independent of status, so the slope is beta + 0.6 * interaction.
pub const PLANTED_SLOPE: f64 = 0.27;

const STATES: [&str; 50] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL", "IN", "IA", "KS", "KY", "LA", "ME",
    "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA",
    "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY",
];

const FIRST: [&str; 40] = [
    "Alice", "Bernard", "Carla", "Dmitri", "Elena", "Felix", "Grace", "Hector", "Irene", "Jonas", "Karen", "Leon",
    "Marta", "Nolan", "Olive", "Pablo", "Quinn", "Rosa", "Stefan", "Tanya", "Ulric", "Vera", "Walter", "Xenia",
    "Yusuf", "Zelda", "Arthur", "Beatrix", "Cyrus", "Delia", "Emmett", "Flora", "Gideon", "Hazel", "Ivan", "Juno",
    "Kurt", "Lydia", "Milo", "Nadia",
];

const LAST: [&str; 40] = [
    "Abernathy", "Blackwood", "Castellano", "Dunmore", "Ellsworth", "Fairbanks", "Galloway", "Hargrove", "Ingram",
    "Jessup", "Kinsley", "Lockhart", "Merriweather", "Northcott", "Oakhurst", "Pembroke", "Quarles", "Ravenscroft",
    "Sutherland", "Thornbury", "Upton", "Vance", "Whitlock", "Yardley", "Ashdown", "Bramwell", "Coldwell", "Drayton",
    "Eastwood", "Fenwick", "Greystone", "Holloway", "Ironside", "Kendrick", "Langford", "Marlowe", "Nettleton",
    "Osgood", "Prescott", "Rutherford",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub house_races: usize,
    pub senate_races: usize,
    pub years: Vec<i32>,
    pub open_seat_share: f64,
    /// Races where exactly one candidate has an article.
    pub one_page_share: f64,
    /// Races where neither candidate has an article.
    pub no_page_share: f64,
    pub channels: Vec<String>,
    /// Standard deviation of the race-level swing between the two candidates.
    pub swing_sd: f64,
    pub noise_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 20181106,
            house_races: 340,
            senate_races: 60,
            years: vec![2016, 2018],
            open_seat_share: 0.2,
            one_page_share: 0.25,
            no_page_share: 0.08,
            channels: vec!["CNN".into(), "FOXNEWS".into()],
            swing_sd: 0.06,
            noise_sd: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub races: usize,
    pub candidates: usize,
    pub with_page: usize,
    pub config: PathBuf,
}

struct Cand {
    id: String,
    name: String,
    party: &'static str,
    incumbent: bool,
    stronghold: bool,
    page: bool,
    /// No-page candidates alternate between an explicit "-" override and a heuristic 404.
    explicit_no_page: bool,
    share_of_attention: f64,
    views: Vec<u64>,
    mentions: Vec<Vec<u64>>,
    receipts: f64,
    vote_share: f64,
}

/// Expected-rate multiplier rising toward election day.
fn growth(day: usize, days: usize) -> f64 {
    let t = day as f64 / (days - 1) as f64;
    0.5 + 2.0 * t.powi(3)
}

fn poisson_series(rng: &mut ChaCha8Rng, rate: f64, days: usize) -> Vec<u64> {
    (0..days)
        .map(|d| {
            let lambda = rate * growth(d, days);
            if lambda <= 0.0 {
                0
            } else {
                Poisson::new(lambda).expect("positive rate").sample(rng) as u64
            }
        })
        .collect()
}

fn pageview_body(title: &str, window: &DateWindow, counts: &[u64]) -> Vec<u8> {
    let items: Vec<_> = window
        .days()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(day, &views)| {
            json!({
                "project": "en.wikipedia",
                "article": title,
                "granularity": "daily",
                "timestamp": format!("{}00", day.format("%Y%m%d")),
                "access": "all-access",
                "agent": "user",
                "views": views,
            })
        })
        .collect();
    serde_json::to_vec(&json!({ "items": items })).expect("json")
}

fn timeline_body(channel: &str, window: &DateWindow, counts: &[u64]) -> Vec<u8> {
    let data: Vec<_> = window
        .days()
        .zip(counts)
        .map(|(day, &c)| json!({ "date": format!("{}T000000Z", day.format("%Y%m%d")), "value": c }))
        .collect();
    serde_json::to_vec(&json!({ "query_details": { "title": channel }, "timeline": [{ "series": channel, "data": data }] }))
        .expect("json")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Writes a complete corpus under `dir` and returns where its config lives.
pub fn generate(dir: &Path, cfg: &SynthConfig) -> Result<SynthSummary, PipelineError> {
    if cfg.years.is_empty() || cfg.years.iter().any(|y| y % 2 != 0) {
        return Err(PipelineError::Config("synthetic years must be even".into()));
    }
    let per_year = |n: usize| n.div_ceil(cfg.years.len());
    if per_year(cfg.senate_races) > STATES.len() {
        return Err(PipelineError::Config(format!("at most {} Senate races per year", STATES.len())));
    }
    if 2 * (cfg.house_races + cfg.senate_races) > FIRST.len() * LAST.len() {
        return Err(PipelineError::Config("too many races for the name pool".into()));
    }
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let attention = Beta::new(0.7, 0.7).expect("beta");
    let swing = Normal::new(0.0, cfg.swing_sd).map_err(|e| PipelineError::Config(e.to_string()))?;
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| PipelineError::Config(e.to_string()))?;
    let days = crate::ingest::WINDOW_DAYS as usize;

    let mut results = String::from("year,chamber,state,district,candidate,party,votes,totalvotes,candidate_id\n");
    let mut receipts = String::from("candidate_id,receipts_usd\n");
    let mut overrides = String::from("candidate_id,wikipedia_title,fec_id,incumbent,stronghold\n");
    let cache = ResponseCache::new(dir.join("cache"));
    let seeder = Fetcher::builder(cache).offline().build();

    let mut name_index = 0usize;
    let mut races = 0usize;
    let mut with_page = 0usize;
    let mut counts_by_year: Vec<(i32, Chamber, usize)> = Vec::new();
    for (i, &year) in cfg.years.iter().enumerate() {
        let share = |n: usize| n / cfg.years.len() + usize::from(i < n % cfg.years.len());
        counts_by_year.push((year, Chamber::House, share(cfg.house_races)));
        counts_by_year.push((year, Chamber::Senate, share(cfg.senate_races)));
    }

    for (year, chamber, n) in counts_by_year {
        let window = DateWindow::election_year(election_day(year)?);
        for r in 0..n {
            let (state, district) = match chamber {
                Chamber::House => (STATES[r % STATES.len()], (r / STATES.len() + 1) as u16),
                Chamber::Senate => (STATES[r], 0),
            };
            let tag = format!("{year}-{}-{state}-{district:02}", &chamber.as_str()[..1]);
            let open = rng.gen_bool(cfg.open_seat_share);
            let inc_side = rng.gen_range(0..2usize);
            let page_roll: f64 = rng.gen();
            let pages = if page_roll < cfg.no_page_share {
                [false, false]
            } else if page_roll < cfg.no_page_share + cfg.one_page_share {
                let missing = rng.gen_range(0..2usize);
                [missing != 0, missing != 1]
            } else {
                [true, true]
            };
            let v = match pages {
                [true, true] => attention.sample(&mut rng),
                [true, false] => 1.0,
                [false, true] => 0.0,
                [false, false] => 0.5,
            };
            let views_rate: f64 = rng.gen_range(40.0..400.0);
            let news_rate: f64 = rng.gen_range(0.02..0.2);

            let mut cands: Vec<Cand> = (0..2usize)
                .map(|side| {
                    let name = format!("{} {}", FIRST[name_index % FIRST.len()], LAST[name_index / FIRST.len()]);
                    name_index += 1;
                    let incumbent = !open && side == inc_side;
                    let attention = if side == 0 { v } else { 1.0 - v };
                    Cand {
                        id: format!("{tag}-{}", ['a', 'b'][side]),
                        name,
                        party: ["DEMOCRAT", "REPUBLICAN"][side],
                        incumbent,
                        stronghold: rng.gen_bool(0.3),
                        page: pages[side],
                        explicit_no_page: rng.gen_bool(0.5),
                        share_of_attention: attention,
                        views: Vec::new(),
                        mentions: Vec::new(),
                        receipts: 0.0,
                        vote_share: 0.0,
                    }
                })
                .collect();

            for c in &mut cands {
                if c.page {
                    c.views = poisson_series(&mut rng, views_rate * c.share_of_attention, days);
                }
                let boost = if c.incumbent { 1.5 } else { 1.0 };
                let rate = news_rate * (0.2 + c.share_of_attention) * boost;
                c.mentions = cfg.channels.iter().map(|_| poisson_series(&mut rng, rate, days)).collect();
                let mu = 13.0 + if c.incumbent { 0.8 } else { 0.0 } + (c.share_of_attention - 0.5);
                c.receipts = (LogNormal::new(mu, 0.8).expect("lognormal").sample(&mut rng) * 100.0).round() / 100.0;
            }

            // vote shares follow the realized ratio the pipeline will compute
            let totals: Vec<f64> = cands.iter().map(|c| c.views.iter().sum::<u64>() as f64).collect();
            let race_total: f64 = totals.iter().sum();
            let u = swing.sample(&mut rng);
            for (side, c) in cands.iter_mut().enumerate() {
                let ratio = if race_total > 0.0 { totals[side] / race_total } else { 0.5 };
                let chal = if c.incumbent { 0.0 } else { 1.0 };
                let sign = if side == 0 { 1.0 } else { -1.0 };
                c.vote_share = PLANTED_ALPHA
                    + PLANTED_BETA * ratio
                    + PLANTED_GAMMA * chal
                    + PLANTED_INTERACTION * ratio * chal
                    + sign * u
                    + noise.sample(&mut rng);
                c.vote_share = c.vote_share.clamp(0.01, 0.98);
            }

            let total_votes: u64 = match chamber {
                Chamber::House => rng.gen_range(150_000..350_000),
                Chamber::Senate => rng.gen_range(1_000_000..5_000_000),
            };
            let mut votes: Vec<u64> = cands.iter().map(|c| (c.vote_share * total_votes as f64).round() as u64).collect();
            if votes[0] == votes[1] {
                votes[0] += 1;
            }

            for (c, votes) in cands.iter().zip(votes) {
                let _ = writeln!(
                    results,
                    "{year},{},{state},{district},{},{},{votes},{total_votes},{}",
                    chamber.as_str(),
                    c.name,
                    c.party,
                    c.id
                );
                let _ = writeln!(receipts, "{},{:.2}", c.id, c.receipts);
                let title = c.name.replace(' ', "_");
                let title_cell = if !c.page && c.explicit_no_page { "-" } else { "" };
                let _ = writeln!(
                    overrides,
                    "{},{title_cell},,{},{}",
                    c.id,
                    u8::from(c.incumbent),
                    u8::from(c.stronghold)
                );
                if c.page {
                    with_page += 1;
                    seeder.seed_pageviews(&title, &window, 200, &pageview_body(&title, &window, &c.views))?;
                } else if !c.explicit_no_page {
                    let body = br#"{"type":"https://mediawiki.org/wiki/HyperSwitch/errors/not_found","title":"Not found."}"#;
                    seeder.seed_pageviews(&title, &window, 404, body)?;
                }
                for (channel, counts) in cfg.channels.iter().zip(&c.mentions) {
                    seeder.seed_tv_mentions(&c.name, channel, &window, &timeline_body(channel, &window, counts))?;
                }
            }
            races += 1;
        }
    }

    let write = |name: &str, text: &str| -> Result<(), PipelineError> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io(&path))
    };
    write("results.csv", &results)?;
    write("receipts.csv", &receipts)?;
    write("overrides.csv", &overrides)?;
    let years: Vec<String> = cfg.years.iter().map(i32::to_string).collect();
    let channels: Vec<String> = cfg.channels.iter().map(|c| format!("{c:?}")).collect();
    let config = format!(
        "# synthetic corpus, seed {}\nyears = [{}]\nchambers = [\"House\", \"Senate\"]\nresults = \"results.csv\"\n\
         receipts = \"receipts.csv\"\noverrides = \"overrides.csv\"\ncache = \"cache\"\nout = \"out\"\n\
         channels = [{}]\noffline = true\n",
        cfg.seed,
        years.join(", "),
        channels.join(", ")
    );
    write("config.toml", &config)?;
    Ok(SynthSummary { races, candidates: 2 * races, with_page, config: dir.join("config.toml") })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { house_races: 12, senate_races: 4, ..SynthConfig::default() }
    }

    #[test]
    fn same_seed_same_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate(a.path(), &small()).unwrap();
        generate(b.path(), &small()).unwrap();
        for f in ["results.csv", "receipts.csv", "overrides.csv", "config.toml"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let other = tempfile::tempdir().unwrap();
        generate(other.path(), &SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(
            std::fs::read(a.path().join("results.csv")).unwrap(),
            std::fs::read(other.path().join("results.csv")).unwrap()
        );
    }

    #[test]
    fn corpus_loads_and_links() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate(dir.path(), &small()).unwrap();
        assert_eq!((s.races, s.candidates), (16, 32));
        let loaded = crate::ingest::load_results(&dir.path().join("results.csv")).unwrap();
        assert_eq!(loaded.rows.len(), 32);
        assert_eq!(loaded.rows.iter().filter(|r| r.win_lose).count(), 16);
        let ovr = crate::ingest::load_overrides(&dir.path().join("overrides.csv")).unwrap();
        let linked = crate::ingest::link_candidates(&loaded.candidates, &ovr).unwrap();
        assert!(linked.iter().all(|c| c.incumbency_source == crate::ingest::IncumbencySource::Override));
    }

    #[test]
    fn rejects_bad_shapes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(generate(dir.path(), &SynthConfig { years: vec![2017], ..small() }).is_err());
        assert!(generate(dir.path(), &SynthConfig { senate_races: 200, ..small() }).is_err());
    }
}
