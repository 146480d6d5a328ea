use std::time::Instant;
fn main() {
    for &n in &[48usize, 64, 96, 128, 192, 256] {
        let len = n * n * n;
        let mut data: Vec<num_complex::Complex64> = (0..len)
            .map(|i| num_complex::Complex64::new((i as f64 * 0.37).sin(), 0.0))
            .collect();
        // warm up plan
        jetcascade::spectral::fft::fft3(&mut data, n, false);
        jetcascade::spectral::fft::fft3(&mut data, n, true);
        let reps = if n <= 96 { 6 } else { 3 };
        let t0 = Instant::now();
        for _ in 0..reps {
            jetcascade::spectral::fft::fft3(&mut data, n, false);
            jetcascade::spectral::fft::fft3(&mut data, n, true);
        }
        let dt = t0.elapsed().as_secs_f64() / (2 * reps) as f64;
        println!("n = {n:4}  per-transform {:8.1} ms   ({:.1} Mpts/s)", dt * 1e3, len as f64 / dt / 1e6);
    }
}
