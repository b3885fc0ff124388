use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ballotlens::ingest::{
    DateWindow, Fetcher, HttpResponse, IngestError, Metric, RateLimiter, ResponseCache, Transport, TransportFailure,
};
use chrono::NaiveDate;

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn window(start: (u32, u32), end: (u32, u32)) -> DateWindow {
    DateWindow::new(
        NaiveDate::from_ymd_opt(2016, start.0, start.1).unwrap(),
        NaiveDate::from_ymd_opt(2016, end.0, end.1).unwrap(),
    )
    .unwrap()
}

fn offline(dir: &std::path::Path) -> Fetcher {
    Fetcher::builder(ResponseCache::new(dir)).offline().build()
}

/// Serves fixed bodies by URL substring and counts calls.
struct Scripted {
    routes: Vec<(&'static str, u16, Vec<u8>)>,
    calls: AtomicUsize,
}

impl Transport for Scripted {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.routes
            .iter()
            .find(|(k, _, _)| url.contains(k))
            .map(|(_, status, body)| HttpResponse { status: *status, retry_after: None, body: body.clone() })
            .ok_or_else(|| TransportFailure(format!("unrouted {url}")))
    }
}

#[test]
fn seeded_pageviews_replay_offline() {
    let dir = tempfile::tempdir().unwrap();
    let w = window((11, 2), (11, 8));
    let f = offline(dir.path());
    f.seed_pageviews("Jane Doe", &w, 200, &fixture("pageviews_jane_doe.json")).unwrap();

    let s = f.fetch_pageviews("c1", "Jane Doe", &w).unwrap();
    assert_eq!(s.metric, Metric::Pageviews);
    assert_eq!(s.start_date, w.start);
    // Nov 5 is absent from the response and zero-filled
    assert_eq!(s.counts, vec![120, 135, 160, 0, 410, 980, 2210]);
    assert_eq!(s.total(), 4015);
    assert_eq!(f.cache_hits(), 1);
    assert_eq!(f.network_fetches(), 0);

    // underscore and space spellings share one cache entry
    let again = offline(dir.path()).fetch_pageviews("c1", "Jane_Doe", &w).unwrap();
    assert_eq!(again.counts, s.counts);
}

#[test]
fn tv_channels_add() {
    let dir = tempfile::tempdir().unwrap();
    let w = window((11, 7), (11, 8));
    let f = offline(dir.path());
    f.seed_tv_mentions("Jane Doe", "CNN", &w, &fixture("tv_cnn.json")).unwrap();
    f.seed_tv_mentions("Jane Doe", "FOXNEWS", &w, &fixture("tv_foxnews.json")).unwrap();
    let chans = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let cnn = f.fetch_tv_mentions("c1", "Jane Doe", &chans(&["CNN"]), &w).unwrap();
    let fox = f.fetch_tv_mentions("c1", "Jane Doe", &chans(&["FOXNEWS"]), &w).unwrap();
    let both = f.fetch_tv_mentions("c1", "Jane Doe", &chans(&["CNN", "FOXNEWS"]), &w).unwrap();
    assert_eq!(cnn.counts, vec![1, 2]);
    assert_eq!(fox.counts, vec![3, 4]);
    assert_eq!(both.counts, vec![4, 6]);
    assert_eq!(both.metric, Metric::TvMentions);
}

#[test]
fn unknown_title_is_page_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let w = window((11, 2), (11, 8));
    let f = offline(dir.path());
    f.seed_pageviews("No Such Person", &w, 404, &fixture("pageviews_not_found.json")).unwrap();
    match f.fetch_pageviews("c9", "No Such Person", &w) {
        Err(IngestError::PageNotFound { title }) => assert_eq!(title, "No_Such_Person"),
        other => panic!("expected PageNotFound, got {other:?}"),
    }
}

#[test]
fn offline_miss_is_a_network_error() {
    let dir = tempfile::tempdir().unwrap();
    let w = window((11, 2), (11, 8));
    let err = offline(dir.path()).fetch_pageviews("c1", "Jane Doe", &w).unwrap_err();
    assert!(matches!(err, IngestError::CacheMiss { .. }), "{err:?}");
    assert!(err.is_network());
}

#[test]
fn cache_is_consulted_before_the_transport() {
    let dir = tempfile::tempdir().unwrap();
    let w = window((11, 2), (11, 8));
    let transport = Arc::new(Scripted {
        routes: vec![
            ("Jane_Doe", 200, fixture("pageviews_jane_doe.json")),
            ("No_Such_Person", 404, fixture("pageviews_not_found.json")),
        ],
        calls: AtomicUsize::new(0),
    });
    let online = || {
        Fetcher::builder(ResponseCache::new(dir.path()))
            .transport(transport.clone())
            .rate_limit(RateLimiter::unlimited())
            .build()
    };

    let first = online();
    let s = first.fetch_pageviews("c1", "Jane Doe", &w).unwrap();
    assert!(first.fetch_pageviews("c9", "No Such Person", &w).is_err());
    assert_eq!(first.network_fetches(), 2);
    assert_eq!(transport.calls.load(Ordering::SeqCst), 2);

    // both the 200 and the 404 were cached; a second pass never reaches the transport
    let second = online();
    assert_eq!(second.fetch_pageviews("c1", "Jane Doe", &w).unwrap().counts, s.counts);
    assert!(matches!(
        second.fetch_pageviews("c9", "No Such Person", &w),
        Err(IngestError::PageNotFound { .. })
    ));
    assert_eq!(second.cache_hits(), 2);
    assert_eq!(second.network_fetches(), 0);
    assert_eq!(transport.calls.load(Ordering::SeqCst), 2);

    // and the same cache serves an offline fetcher
    assert_eq!(offline(dir.path()).fetch_pageviews("c1", "Jane_Doe", &w).unwrap().counts, s.counts);
}
