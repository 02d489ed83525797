use cabm::entrance::{InitialData, IsolatedPoint, PointMeasure, StepFunction, Weight};
use proptest::prelude::*;

fn data_strategy() -> impl Strategy<Value = InitialData> {
    let increasing = |n| {
        prop::collection::vec(0.01..1.0f64, n).prop_map(|gaps| {
            gaps.iter()
                .scan(-2.0, |x, g| {
                    *x += g;
                    Some(*x)
                })
                .collect::<Vec<f64>>()
        })
    };
    prop_oneof![
        increasing(0..6).prop_map(|p| InitialData::FiniteSpin {
            atoms: PointMeasure::simple(&p).unwrap()
        }),
        increasing(0..4).prop_flat_map(|bps| {
            prop::collection::vec(-1.0..=1.0f64, bps.len() + 1).prop_map(move |vals| {
                InitialData::Product {
                    f: StepFunction::new(bps.clone(), vals).unwrap(),
                }
            })
        }),
        (increasing(4..5), prop::option::of(1u32..4)).prop_map(|(p, w)| {
            InitialData::ClosedSetAvoid {
                intervals: vec![(p[0], p[1])],
                isolated: vec![IsolatedPoint {
                    position: p[3],
                    weight: w.map_or(Weight::Infinite, Weight::Finite),
                }],
            }
        }),
        Just(InitialData::Maximal),
    ]
}

proptest! {
    #[test]
    fn json_round_trip(data in data_strategy()) {
        let text = serde_json::to_string(&data).unwrap();
        let back: InitialData = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, data);
    }
}

#[test]
fn documented_examples_parse() {
    let examples = [
        r#"{"variant":"finite_spin","atoms":[{"position":-1},{"position":0},{"position":2,"multiplicity":3}]}"#,
        r#"{"variant":"product","f":{"breakpoints":[-1,0,1.5],"values":[1,0.3,-0.5,1]}}"#,
        r#"{"variant":"closed_set_avoid","intervals":[[0,1]],"isolated":[{"position":2,"weight":"inf"}]}"#,
        r#"{"variant":"maximal"}"#,
    ];
    for e in examples {
        let d: InitialData = serde_json::from_str(e).unwrap_or_else(|err| panic!("{e}: {err}"));
        d.validate(0.5).or_else(|_| d.validate(1.0)).unwrap();
    }
}

#[test]
fn malformed_data_is_rejected() {
    for e in [
        r#"{"variant":"finite_spin","atoms":[{"position":1},{"position":0}]}"#,
        r#"{"variant":"product","f":{"breakpoints":[0],"values":[1]}}"#,
        r#"{"variant":"nonsense"}"#,
    ] {
        assert!(serde_json::from_str::<InitialData>(e).is_err(), "{e}");
    }
}
