use std::path::PathBuf;

use chrono::NaiveDate;
use proptest::prelude::*;

use abmcal::error::Error;
use abmcal::ingest::{daily_differences, ingest, ingest_file, parse_iso_date, read_region, trailing_moving_average};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn date(s: &str) -> NaiveDate {
    parse_iso_date(s).unwrap()
}

#[test]
fn toy_table() {
    let series = ingest_file(&fixture("jhu_toy.csv"), "Toyland", date("2021-01-01"), date("2021-01-03")).unwrap();
    assert_eq!(series.as_slice(), &[1, 2, 3]);
}

#[test]
fn south_africa_window_has_83_days() {
    let series = ingest_file(
        &fixture("jhu_confirmed_global.csv"),
        "South Africa",
        date("2020-06-16"),
        date("2020-09-06"),
    )
    .unwrap();
    assert_eq!(series.days(), 83);
    assert!(series.total() > 0);
}

#[test]
fn provinces_are_summed() {
    let file = std::fs::File::open(fixture("jhu_confirmed_global.csv")).unwrap();
    let australia = read_region(file, "Australia").unwrap();
    let text = std::fs::read_to_string(fixture("jhu_confirmed_global.csv")).unwrap();
    let mut expected = vec![0.0; australia.counts.len()];
    for line in text.lines().filter(|l| l.contains(",Australia,")) {
        for (e, cell) in expected.iter_mut().zip(line.split(',').skip(4)) {
            *e += cell.parse::<f64>().unwrap();
        }
    }
    assert_eq!(australia.counts, expected);
}

#[test]
fn unknown_region_and_bad_dates() {
    let path = fixture("jhu_confirmed_global.csv");
    assert!(matches!(
        ingest_file(&path, "Atlantis", date("2020-06-16"), date("2020-09-06")),
        Err(Error::UnknownRegion(_))
    ));
    assert!(matches!(
        ingest_file(&path, "South Africa", date("2019-06-16"), date("2020-09-06")),
        Err(Error::DateRange { .. })
    ));
    assert!(matches!(
        ingest_file(&path, "South Africa", date("2020-09-06"), date("2020-06-16")),
        Err(Error::DateRange { .. })
    ));
    assert!(parse_iso_date("06/16/2020").is_err());
}

#[test]
fn constant_cumulative_gives_zero_infections() {
    let table = "Province/State,Country/Region,Lat,Long,1/1/21,1/2/21,1/3/21,1/4/21\n,Flat,0,0,9,9,9,9\n";
    let series = ingest(table.as_bytes(), "Flat", date("2021-01-01"), date("2021-01-03")).unwrap();
    assert_eq!(series.as_slice(), &[0, 0, 0]);
}

#[test]
fn downward_revision_is_clipped() {
    assert_eq!(daily_differences(&[5.0, 8.0, 6.0, 10.0]), vec![3.0, 0.0, 4.0]);
}

#[test]
fn moving_average_examples() {
    assert_eq!(trailing_moving_average(&[7.0; 10], 7), vec![7.0; 10]);
    let ma = trailing_moving_average(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 7);
    assert_eq!(ma[6], 4.0);
    assert_eq!(ma[7], 5.0);
    assert_eq!(&ma[..6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
}

proptest! {
    #[test]
    fn differences_invert_cumulative_sums(steps in prop::collection::vec(0u32..1000, 1..60), start in 0u32..1000) {
        let mut cumulative = vec![start as f64];
        for s in &steps {
            cumulative.push(cumulative.last().unwrap() + *s as f64);
        }
        let daily = daily_differences(&cumulative);
        prop_assert_eq!(daily, steps.iter().map(|&s| s as f64).collect::<Vec<_>>());
    }
}
