use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ordlab_core::bigram::{
    document_streams, preprocess, select_word_with, train_bigram, MarginalTable,
};

fn corpus() -> Vec<String> {
    let words = [
        "river", "stone", "wind", "mill", "grain", "tower", "lamp", "field", "cloud", "bridge",
    ];
    let mut docs = Vec::new();
    for d in 0..8 {
        let mut sentences = Vec::new();
        for s in 0..20 {
            let sentence: Vec<&str> = (0..6).map(|i| words[(d * 3 + s * 5 + i * 7) % 10]).collect();
            sentences.push(sentence.join(" "));
        }
        docs.push(sentences.join(". "));
    }
    docs
}

fn bench_bigram(c: &mut Criterion) {
    let docs = corpus();
    c.bench_function("preprocess_8_docs", |b| {
        b.iter(|| preprocess(black_box(&docs)).unwrap())
    });

    let pre = preprocess(&docs).unwrap();
    let streams = document_streams(&pre);
    c.bench_function("train_bigram_1_epoch", |b| {
        b.iter(|| train_bigram(black_box(&streams), &pre.vocab, 16, 24, 3, 1, 1).unwrap())
    });

    let model = train_bigram(&streams, &pre.vocab, 16, 24, 3, 4, 1).unwrap();
    c.bench_function("marginal_table_build", |b| {
        b.iter(|| MarginalTable::build(black_box(&model)).unwrap())
    });

    let table = MarginalTable::build(&model).unwrap();
    let sentence = &pre.sentences[1].lemma_ids;
    let context = *pre.sentences[0].lemma_ids.last().unwrap();
    c.bench_function("select_word_one_sentence", |b| {
        b.iter(|| select_word_with(black_box(&model), &table, context, sentence).unwrap())
    });
}

criterion_group!(benches, bench_bigram);
criterion_main!(benches);
