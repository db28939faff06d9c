use std::sync::Arc;
use std::time::Instant;
fn main() {
    let heavy = Arc::new(crackle::distributions::RadialDensity::heavy_polynomial(2.0, 1).unwrap());
    let light2 = Arc::new(crackle::distributions::RadialDensity::light_von_mises(2.0, 1).unwrap());
    let light1 = Arc::new(crackle::distributions::RadialDensity::light_von_mises(1.0, 1).unwrap());
    let light4 = Arc::new(crackle::distributions::RadialDensity::light_von_mises(4.0, 1).unwrap());
    for (name, d) in [("heavy a=2", &heavy), ("light t=2", &light2), ("light t=1", &light1), ("light t=4", &light4)] {
        let t0 = Instant::now();
        let c = crackle::distributions::sample_cloud(1_000_000.0, d, 42).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        println!("{name}: 1e6 points in {:.3} s ({:.0} ns/pt), len {}", dt, dt * 1e3, c.len());
    }
}
