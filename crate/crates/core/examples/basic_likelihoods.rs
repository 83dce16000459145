//! The three log-likelihoods on the two-variable example: 45% of cases show
//! A=t with B hidden, the rest are complete.
//!
//! The truth θ_0 = (0.5, 0.2) is the sat-profile maximizer; EM converges to
//! θ_1 = (0.5, 0.2727) because it reads the hidden B values as missing at
//! random.

use coarsebn::em::{em_fit, EmOptions};
use coarsebn::fixtures;
use coarsebn::likelihood::{car_normalizer, car_profile_loglik, exact_sat_profile_loglik, face_value_loglik, lr_statistic};
use coarsebn::numfmt::human;

fn main() -> coarsebn::Result<()> {
    let data = fixtures::basic_ex21_data();
    let theta0 = fixtures::basic();
    let em = em_fit(&theta0, &data, &EmOptions::default())?;
    let theta1 = em.raw;
    println!("EM estimate: P(A=t) = {}, P(B=t) = {}", human(theta1.cpt(0)[0]), human(theta1.cpt(1)[0]));

    println!("{:>8} {:>12} {:>12} {:>12}", "", "fv", "car", "sat");
    for (name, net) in [("theta0", &theta0), ("theta1", &theta1)] {
        let fv = face_value_loglik(net, &data)?.per_case_average;
        let car = car_profile_loglik(net, &data)?.per_case_average;
        let sat = exact_sat_profile_loglik(net, &data, 1e-14)?.per_case_average;
        println!("{name:>8} {:>12} {:>12} {:>12}", human(fv), human(car), human(sat));
    }

    let f = car_normalizer(&data, &theta0)?;
    println!("\ncar normalizer log f = {} per case", human(f.log_f_per_unit));
    for (u, l) in &f.lambdas {
        println!("  lambda[{}] = {}", u.display(&theta0), human(*l));
    }

    let sat = exact_sat_profile_loglik(&theta0, &data, 1e-14)?;
    if let Some(c) = sat.completion() {
        println!("\nsat-optimal completion of the coarse case:");
        for (x, p) in &c.per_case()[0] {
            println!("  {x:?}: {}", human(*p));
        }
    }

    let lr = lr_statistic(&theta0, &theta1, &data)?;
    println!("\nper-case likelihood ratio, sat(theta0) - car(theta1): {}", human(lr));
    Ok(())
}
