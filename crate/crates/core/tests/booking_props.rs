use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roblab_core::booking::{BookingStore, Denial};

fn base() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2031, 1, 1, 0, 0, 0).unwrap()
}

/// Up to 100 distinct names and a list of (owner index, gap, length) in µs.
fn layout() -> impl Strategy<Value = (Vec<String>, Vec<(usize, i64, i64)>)> {
    let names = prop::collection::btree_set("[a-z][a-z0-9_-]{0,15}", 1..=100)
        .prop_map(|s: BTreeSet<String>| s.into_iter().filter(|n| n != "example").collect::<Vec<_>>())
        .prop_filter("at least one user", |v| !v.is_empty());
    names.prop_flat_map(|names| {
        let n = names.len();
        let slots = prop::collection::vec((0..n, 0i64..3_600_000_000, 1i64..7_200_000_000), 0..=100);
        (Just(names), slots)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_stores_roundtrip_and_admit_only_inside_slots((names, raw) in layout(), probes in prop::collection::vec(0i64..800_000_000_000, 50)) {
        let mut rng = ChaCha8Rng::seed_from_u64(names.len() as u64);
        let mut store = BookingStore::new();
        for n in &names {
            store.add_user(n, &format!("pw-{n}"), &mut rng).unwrap();
        }
        let mut cursor = base();
        let mut booked = Vec::new();
        for (owner, gap, len) in raw {
            let start = cursor + Duration::microseconds(gap);
            let end = start + Duration::microseconds(len);
            store.reserve(&names[owner], start, end).unwrap();
            booked.push((owner, start, end));
            cursor = end;
        }

        let text = store.to_text();
        let back = BookingStore::from_text(&text).unwrap();
        prop_assert_eq!(&back, &store);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("booking.txt");
        store.save(&path).unwrap();
        prop_assert_eq!(&BookingStore::load(&path).unwrap(), &store);

        let mut instants: Vec<DateTime<Utc>> = probes.iter().map(|&us| base() + Duration::microseconds(us)).collect();
        for &(_, s, e) in &booked {
            instants.extend([s - Duration::microseconds(1), s, e - Duration::microseconds(1), e]);
        }
        for t in instants {
            let holder = booked.iter().find(|&&(_, s, e)| s <= t && t < e).map(|&(o, _, _)| o);
            for (i, n) in names.iter().enumerate() {
                let want = if holder == Some(i) { Ok(()) } else { Err(Denial::NoSlot) };
                prop_assert_eq!(back.authenticate(n, &format!("pw-{n}"), t), want);
            }
            prop_assert_eq!(back.authenticate("example", "", t), Ok(()));
        }
    }
}
