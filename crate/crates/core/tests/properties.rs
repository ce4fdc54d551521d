use mixreg::distributions::skew_t_pdf;
use mixreg::io::{read_csv, write_csv, LoadedData};
use mixreg::model::{log_likelihood, mixture_density, responsibilities, Component, Dataset, FamilyKind, MixtureParams};
use mixreg::numerics::{integrate, QuadratureSpec};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = FamilyKind> {
    prop::sample::select(FamilyKind::ALL.to_vec())
}

fn theta(kind: FamilyKind, g: usize) -> impl Strategy<Value = MixtureParams> {
    let comp = (prop::collection::vec(-3.0..3.0f64, 2), 0.05..4.0f64, -4.0..4.0f64, 1.2..40.0f64);
    (prop::collection::vec(comp, g), prop::collection::vec(0.05..1.0f64, g)).prop_map(move |(cs, w)| {
        let total: f64 = w.iter().sum();
        MixtureParams {
            family: kind,
            weights: w.iter().map(|v| v / total).collect(),
            components: cs
                .into_iter()
                .map(|(beta, sigma2, lambda, nu)| Component {
                    beta,
                    sigma2,
                    lambda: if kind.is_skewed() { lambda } else { 0.0 },
                    nu: if matches!(kind, FamilyKind::StudentT | FamilyKind::SkewT) { nu } else { f64::INFINITY },
                })
                .collect(),
        }
    })
}

fn family_and_theta() -> impl Strategy<Value = MixtureParams> {
    (family(), 1..4usize).prop_flat_map(|(k, g)| theta(k, g))
}

fn data() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((-5.0..5.0f64, -50.0..50.0f64), 1..40)
        .prop_map(|v| Dataset::new(v.iter().map(|p| vec![1.0, p.0]).collect(), v.iter().map(|p| p.1).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn responsibility_rows_are_distributions(t in family_and_theta(), d in data()) {
        let z = responsibilities(&d, &t).unwrap().z;
        for j in 0..d.n() {
            let row: f64 = (0..t.g()).map(|i| z[(j, i)]).sum();
            prop_assert!((row - 1.0).abs() < 1e-12);
            prop_assert!((0..t.g()).all(|i| (0.0..=1.0).contains(&z[(j, i)])));
        }
    }

    #[test]
    fn mixture_density_integrates_to_one(t in family_and_theta(), x in -3.0..3.0f64) {
        let row = [1.0, x];
        let mass = integrate(|y| mixture_density(y, &row, &t).unwrap(), f64::NEG_INFINITY, f64::INFINITY, &QuadratureSpec::default()).unwrap();
        prop_assert!((mass - 1.0).abs() < 1e-6, "mass {}", mass);
    }

    #[test]
    fn log_likelihood_ignores_labels(t in (family(), 2..4usize).prop_flat_map(|(k, g)| theta(k, g)), d in data()) {
        let mut perm: Vec<usize> = (0..t.g()).collect();
        perm.rotate_left(1);
        let (a, b) = (log_likelihood(&d, &t).unwrap(), log_likelihood(&d, &t.permuted(&perm)).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn skew_t_reflection(e in -20.0..20.0f64, s2 in 0.01..9.0f64, l in -6.0..6.0f64, nu in 1.05..80.0f64) {
        let a = skew_t_pdf(e, s2, l, nu).unwrap();
        let b = skew_t_pdf(-e, s2, -l, nu).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.max(1e-300));
    }

    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec((any::<f64>(), any::<f64>()), 1..30)) {
        let rows: Vec<(f64, f64)> = rows.into_iter().filter(|(a, b)| a.is_finite() && b.is_finite()).collect();
        prop_assume!(!rows.is_empty());
        let loaded = LoadedData {
            data: Dataset::new(rows.iter().map(|r| vec![1.0, r.0]).collect(), rows.iter().map(|r| r.1).collect()).unwrap(),
            predictors: vec!["x".into()],
            response: "y".into(),
            intercept: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_csv(&p, &loaded).unwrap();
        let back = read_csv(std::fs::File::open(&p).unwrap(), &p, None, true).unwrap();
        prop_assert_eq!(back.data, loaded.data);
    }
}
