use ndarray::{ArrayD, IxDyn};
use std::time::Instant;
use vqshape::nn::{ConvConf, ParamStore, Tape, Conv2d};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::<f32>::new();
    // pipeline-ish stack: 224x224 backbone sizes
    let c1 = Conv2d::init(&mut store, &mut rng, "c1", 3, 24, 5, ConvConf::new(2, 2), true);
    let c2 = Conv2d::init(&mut store, &mut rng, "c2", 24, 48, 3, ConvConf::new(2, 1), true);
    let c3 = Conv2d::init(&mut store, &mut rng, "c3", 48, 96, 3, ConvConf::new(2, 1), true);
    let c4 = Conv2d::init(&mut store, &mut rng, "c4", 96, 128, 3, ConvConf::new(1, 1), true);
    let x = ArrayD::<f32>::from_elem(IxDyn(&[8, 3, 224, 224]), 0.5f32);

    // warmup + timed
    for round in 0..2 {
        let start = Instant::now();
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let a = c1.forward(&mut tape, &store, xv);
        let a = tape.relu(a);
        let a = c2.forward(&mut tape, &store, a);
        let a = tape.relu(a);
        let a = c3.forward(&mut tape, &store, a);
        let a = tape.relu(a);
        let a = c4.forward(&mut tape, &store, a);
        let a = tape.sigmoid(a);
        let loss = tape.mean_all(a);
        let fwd = start.elapsed();
        let grads = tape.backward(loss);
        let _ = grads;
        if round == 1 {
            println!("fwd: {:?}  fwd+bwd: {:?}", fwd, start.elapsed());
        }
    }
}
