use humor_core::neural::{generate, make_windows, trailing_cycle, train, NeuralConfig, NeuralLM, Vocab};

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(str::to_string).collect()
}

#[test]
fn single_window_is_memorized() {
    let seq = vec![words("the end of the world")];
    let vocab = Vocab::build(&seq, None);
    let config = NeuralConfig {
        vocab_size: vocab.len(),
        embed_dim: 16,
        hidden_dim: 32,
        dropout_rate: 0.0,
        learning_rate: 0.5,
        epochs: 500,
        batch_size: 1,
        seed: 1,
        ..NeuralConfig::default()
    };
    let windows = make_windows(&vocab, &seq, config.sequence_length);
    let one = vec![windows[0].clone()];
    let mut model = NeuralLM::build(&config, vocab).unwrap();
    let history = train(&mut model, &one, &config).unwrap();
    assert_eq!(history.len(), 500);
    let first_below = history.iter().position(|&l| l < 0.1);
    assert!(first_below.is_some(), "final loss {}", history.last().unwrap());

    let out = generate(&model, &words("the end of the"), 1, 0, 0.0);
    assert_eq!(out.tokens.last().map(String::as_str), Some("world"));
}

#[test]
fn injected_cycle_is_detected() {
    let tokens = words("i don t know what i am doing in the middle of the world of the world");
    let cycle = trailing_cycle(&tokens).unwrap();
    assert_eq!((cycle.period, cycle.repeats, cycle.span), (3, 2, 6));
    assert!(trailing_cycle(&words("a smile is the best")).is_none());
}
