//! Compare backpropagated gradients of each network against central finite
//! differences on a single image.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use pmu_gaf::gaf::encode_series;
use pmu_gaf::models::{LeNet, LeNetConfig, Lstm, Network, RecurrentConfig, Rnn};
use pmu_gaf::GafImage;

const H: f64 = 1e-5;

fn loss(net: &dyn Network, image: &GafImage, target: usize) -> f64 {
    net.loss_and_grad(image, target).expect("valid input").loss
}

/// Largest relative error over (at most) 32 evenly spaced coordinates per block.
fn check(net: &mut dyn Network, image: &GafImage, target: usize) {
    let analytic = net.loss_and_grad(image, target).expect("valid input").grads;
    let names = net.block_names();
    for (b, grad) in analytic.iter().enumerate() {
        let len = grad.len();
        let step = len.div_ceil(32);
        let mut worst = 0.0f64;
        for i in (0..len).step_by(step) {
            let orig = net.params()[b].data()[i];
            net.params_mut()[b].data_mut()[i] = orig + H;
            let up = loss(net, image, target);
            net.params_mut()[b].data_mut()[i] = orig - H;
            let down = loss(net, image, target);
            net.params_mut()[b].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = grad.data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
        println!("  {:<14} {:>6} params  max rel err {worst:.2e}", names[b], len);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin() + 0.05 * i as f64).collect();
    let image = encode_series(&series, 16)?;

    let mut cnn = LeNet::new(
        LeNetConfig {
            conv1_channels: 4,
            ..LeNetConfig::with_input_size(16)
        },
        1,
    )?;
    println!("cnn ({} params)", cnn.num_params());
    check(&mut cnn, &image, 2);

    let cfg = RecurrentConfig {
        input_size: 16,
        hidden: 8,
    };
    let mut rnn = Rnn::new(cfg, 1);
    println!("rnn ({} params)", rnn.num_params());
    check(&mut rnn, &image, 0);

    let mut lstm = Lstm::new(cfg, 1);
    println!("lstm ({} params)", lstm.num_params());
    check(&mut lstm, &image, 1);
    Ok(())
}
