use bpvei_core::analysis::{mean_double_sum, mean_sequence};
use bpvei_core::pgf::PgfEngine;
use bpvei_core::{BpveiModel, GenerationSchedule, LawSpec, ParamSchedule, Role, Stage};
use proptest::prelude::*;

fn table(entries: Vec<f64>, fallback: f64) -> ParamSchedule {
    ParamSchedule::Table {
        entries,
        fallback: Box::new(ParamSchedule::constant(fallback)),
    }
}

/// Offspring law families with per-generation parameters and means in
/// roughly `[0.5, 2]`.
fn offspring_spec(len: usize) -> impl Strategy<Value = LawSpec> {
    prop_oneof![
        prop::collection::vec(0.34f64..0.66, len)
            .prop_map(|v| LawSpec::Geometric { p: table(v, 0.5) }),
        prop::collection::vec(0.5f64..2.0, len).prop_map(|v| LawSpec::Poisson {
            rate: table(v, 1.0)
        }),
        prop::collection::vec(0.5f64..2.0, len)
            .prop_map(|v| LawSpec::LinearFractional { m: table(v, 1.0) }),
        (0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0).prop_map(|(a, b, c, d)| {
            let t = a + b + c + d;
            LawSpec::finite(vec![a / t, b / t, c / t, d / t])
        }),
    ]
}

fn immigration_spec(len: usize) -> impl Strategy<Value = LawSpec> {
    prop_oneof![
        prop::collection::vec(0.2f64..3.0, len).prop_map(|v| LawSpec::Poisson {
            rate: table(v, 1.0)
        }),
        prop::collection::vec(0.1f64..0.9, len)
            .prop_map(|v| LawSpec::BernoulliShift { p: table(v, 0.5) }),
        prop::collection::vec(0.2f64..0.8, len)
            .prop_map(|v| LawSpec::Geometric { p: table(v, 0.5) }),
    ]
}

/// Two-stage schedules switching at a random generation.
fn model(len: usize) -> impl Strategy<Value = BpveiModel> {
    (
        offspring_spec(len),
        offspring_spec(len),
        immigration_spec(len),
        1u64..(len as u64),
    )
        .prop_map(|(o1, o2, imm, cut)| {
            let off =
                GenerationSchedule::new(vec![Stage::closed(0, cut - 1, o1), Stage::open(cut, o2)]);
            BpveiModel::new("random", off, GenerationSchedule::homogeneous(imm), false)
                .expect("parameters admissible")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative(
        m in model(30),
        (k, j, n) in (0u64..10, 0u64..10, 0u64..10).prop_map(|(a, b, c)| {
            let mut v = [a, a + b, a + b + c];
            v.sort();
            (v[0] as i64 - 1, v[1], v[2])
        }),
        s in 0.0f64..1.0,
    ) {
        let e = PgfEngine::new(&m, 30);
        let direct = e.compose_offspring(k, n, s).unwrap();
        let inner = e.compose_offspring(j as i64, n, s).unwrap();
        let split = e.compose_offspring(k, j, inner).unwrap();
        prop_assert!((direct - split).abs() < 1e-12, "{direct} {split}");
    }

    #[test]
    fn law_at_follows_stages(m in model(30), n in 0u64..60) {
        for role in [Role::Offspring, Role::Immigration] {
            let stage = m
                .schedule(role)
                .stages()
                .iter()
                .find(|st| st.from <= n && st.to.is_none_or(|t| n <= t))
                .expect("stages partition the generations");
            prop_assert_eq!(m.law_at(role, n), stage.law.instantiate(n).unwrap());
        }
    }

    #[test]
    fn mean_double_sum_matches_recursion(m in model(50)) {
        let rec = mean_sequence(&m, 50);
        let ds = mean_double_sum(&m, 50);
        for (r, d) in rec.iter().zip(&ds) {
            prop_assert!((r - d).abs() <= 1e-10 * r.abs().max(1.0), "{r} {d}");
        }
    }

    #[test]
    fn iterated_shape_identity(
        m in model(20),
        k in 0u64..10,
        len in 1u64..10,
        s in 0.0f64..0.99,
    ) {
        let e = PgfEngine::new(&m, 20);
        let r = e.iterated_shape_residual(k, k + len, s).unwrap();
        prop_assert!(r < 1e-9, "residual {r}");
    }
}
