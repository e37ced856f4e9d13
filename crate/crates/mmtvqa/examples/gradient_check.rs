//! Verify the analytic gradients of the joint loss against central finite
//! differences, element by element, over every parameter group: the
//! shared encoder, the image projection, both selective-attention and gate
//! blocks, and both decoders.
//!
//! Usage:
//!   cargo run --release --example gradient_check

use mmtvqa::data::TrainingExample;
use mmtvqa::model::{ForwardMode, Model, ModelConfig};
use ndarray::Array2;

fn main() -> mmtvqa::Result<()> {
    let config = ModelConfig {
        d_model: 8,
        ffn_dim: 16,
        n_heads: 2,
        encoder_layers: 1,
        decoder_layers: 1,
        dropout: 0.0,
        label_smoothing: 0.1,
        vqa_loss_weight: 0.3,
        d_v: 6,
        n_patches: 4,
        text_vocab: 20,
        target_vocab: 20,
        answer_vocab: 20,
        seed: 1,
    };
    let model = Model::new(config.clone())?;
    let example = TrainingExample {
        source_ids: vec![5, 9, 13, 7, 11],
        question_ids: vec![6, 10, 14],
        target_ids: vec![8, 12, 16, 5],
        answer_ids: vec![17, 9],
        image_id: "probe".into(),
    };
    let features = Array2::from_shape_fn((config.n_patches, config.d_v), |(r, c)| {
        ((r * 7 + c * 3) as f64 * 0.61).sin() * 0.9
    });

    let mut pass = model.forward_pass(&example, &features, &mut ForwardMode::eval())?;
    let root = pass.combined_loss(
        1.0 / pass.mmt_tokens as f64,
        config.vqa_loss_weight / pass.vqa_tokens as f64,
    );
    let grads = pass.gradients(root);

    let h = 1e-5;
    let start = std::time::Instant::now();
    let mut checked = 0usize;
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, analytic) in &grads {
        let base = model.params.get(name).unwrap().to_owned();
        let mut fd = Array2::zeros(base.raw_dim());
        for idx in 0..base.len() {
            let idx2 = (idx / base.ncols(), idx % base.ncols());
            let probe = |delta: f64| -> mmtvqa::Result<f64> {
                let mut params = model.params.clone();
                let mut t = base.clone();
                t[idx2] += delta;
                params.set(name, t)?;
                Model::from_parts(config.clone(), params)?
                    .example_loss(&example, &features, &mut ForwardMode::eval())
            };
            fd[idx2] = (probe(h)? - probe(-h)?) / (2.0 * h);
            checked += 1;
        }
        let diff_norm = (analytic - &fd).mapv(|x| x * x).sum().sqrt();
        // the 1e-4 floor keeps tensors whose true gradient is exactly zero
        // (attention key biases: softmax ignores per-row score shifts) from
        // measuring finite-difference noise against itself
        let scale = analytic
            .mapv(|x| x * x)
            .sum()
            .sqrt()
            .max(fd.mapv(|x| x * x).sum().sqrt())
            .max(1e-4);
        let rel = diff_norm / scale;
        if rel > worst.0 {
            worst = (rel, name.clone());
        }
        println!("{name:55} rel error {rel:.3e}");
    }
    println!(
        "\nchecked {checked} elements in {:.1}s; worst group: {} at {:.3e}",
        start.elapsed().as_secs_f64(),
        worst.1,
        worst.0
    );
    Ok(())
}
