// Every runnable example is compiled into this target and executed.

mod ess_report {
    include!("../examples/ess_report.rs");

    #[test]
    fn runs() {
        let r = run_example().unwrap();
        assert_eq!(r.p, 5);
        assert!(r.ess_multivariate > 0.0 && r.ess_multivariate < r.n as f64);
        assert_eq!(r.sufficient, r.ess_multivariate >= r.min_ess);
    }
}

mod confidence_region {
    include!("../examples/confidence_region.rs");

    #[test]
    fn runs() {
        let r = run_example().unwrap();
        assert_eq!(r.boundary.len(), 60);
        assert!(r.region.volume_root() > 0.0);
        assert!(r.box_volume_root > 0.0);
        assert_eq!(r.covers_truth, r.region.contains(&[0.0; 5]).unwrap());
    }
}

mod sequential_stop {
    include!("../examples/sequential_stop.rs");

    #[test]
    fn runs() {
        let (multi, uni) = run_example().unwrap();
        assert!(multi.terminated && uni.terminated);
        assert!(multi.n_final >= 1000);
    }
}

mod var1_oracle {
    include!("../examples/var1_oracle.rs");

    #[test]
    fn runs() {
        let errors = run_example().unwrap();
        assert_eq!(errors.len(), 3);
        assert!(errors[2].1 < errors[0].1);
    }
}

mod logistic_rwm {
    include!("../examples/logistic_rwm.rs");

    #[test]
    fn runs() {
        let r = run_example().unwrap();
        assert_eq!(r.mean.len(), 5);
        assert!(r.acceptance_rate > 0.1 && r.acceptance_rate < 0.6, "{}", r.acceptance_rate);
        assert!(r.ess > 100.0);
    }
}

mod external_sampler {
    include!("../examples/external_sampler.rs");

    #[test]
    fn runs() {
        let n = run_example().unwrap();
        assert!(n >= 1000);
    }
}

mod replicate_study {
    include!("../examples/replicate_study.rs");

    #[test]
    fn runs() {
        let r = run_example().unwrap();
        assert_eq!(r.rows.len(), 20 * 3);
        assert_eq!(r.aggregates.len(), 3);
    }
}
