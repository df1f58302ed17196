use maxwell_hp::coefficients::Wavenumber;
use maxwell_hp::fem::Family;
use maxwell_hp::study::loglog_slope;
use maxwell_hp::verification::{builtin_manufactured, manufactured_errors};

#[test]
fn trig_solution_converges_at_rate_p() {
    let case = builtin_manufactured("manufactured_trig").unwrap();
    for k in [1.0, 5.0] {
        for p in [1, 2] {
            let errs = manufactured_errors(
                &case,
                Family::NedelecII,
                p,
                Wavenumber::real(k).unwrap(),
                &[2, 4, 8],
            )
            .unwrap();
            let rate = loglog_slope(&errs).unwrap();
            println!("k={k} p={p} errors={errs:?} rate={rate:.3}");
            assert!((rate - p as f64).abs() <= 0.25, "k={k} p={p}: rate {rate}");
        }
    }
}
