use polyipa_core::eval::{stratify, EvalItem};
use polyipa_core::features::DistanceParams;
use polyipa_core::lexicon::tsv::{parse_raw, write_lexicon};
use polyipa_core::lexicon::{clean, lang_script_tag};
use polyipa_core::mining::{mine_soundalikes, write_pairs, MiningParams};
use polyipa_core::p2g::{
    decode_all, load_external_candidates, write_candidates, JointModel, TrainingPair,
};
use polyipa_core::resources::Resources;
use polyipa_core::split::{
    stratified_split, upsample_generate, variants_from_pairs, Provenance, SplitSpec,
};

const LEXICON: &str = include_str!("fixtures/lexicon_1000.tsv");

#[test]
fn library_pipeline_end_to_end() {
    let res = Resources::builtin();
    let (lex, report) = clean(&parse_raw(LEXICON), res);
    assert!(report.is_conserved());
    assert_eq!(lex.len(), 1000);

    let spec = SplitSpec {
        test_size: 40,
        eval_size: 20,
        seed: 5,
        ..SplitSpec::default()
    };
    let split = stratified_split(&lex, &spec).unwrap();
    assert_eq!(
        split.train.len() + split.eval.len() + split.test.len(),
        1000
    );

    let train_lex = split.train.iter().cloned().collect();
    let params = MiningParams {
        k: 10,
        threshold: 1.0,
        exclude_existing: true,
        ..MiningParams::default()
    };
    let pairs =
        mine_soundalikes(&train_lex, &params, &DistanceParams::default(), None, res).unwrap();
    assert!(pairs.iter().all(|p| p.a < p.b && p.distance <= 1.0));
    let mut pair_text = Vec::new();
    write_pairs(&mut pair_text, &train_lex, &pairs).unwrap();
    let variants =
        variants_from_pairs(std::str::from_utf8(&pair_text).unwrap(), &res.inventory).unwrap();

    let gen = upsample_generate(&split.train, &variants, &spec, &res.scripts, &res.inventory);
    let examples: Vec<_> = gen.collect();
    let originals = examples
        .iter()
        .filter(|e| e.provenance == Provenance::Original)
        .count();
    assert_eq!(originals, split.train.len());
    assert!(examples.len() > originals);

    let data: Vec<TrainingPair> = examples
        .iter()
        .map(|e| TrainingPair {
            tag: e.tag.clone(),
            ipa: e.ipa.clone(),
            grapheme: e.grapheme.clone(),
        })
        .collect();
    let (model, stats) = JointModel::train(&data, 4).unwrap();
    assert_eq!(stats.aligned + stats.skipped, data.len());
    let model = JointModel::from_text(&model.to_text()).unwrap();

    let inputs: Vec<_> = split
        .test
        .iter()
        .map(|e| (lang_script_tag(e, &res.scripts), e.ipa.clone()))
        .collect();
    let decoded = decode_all(&model, &inputs, 5, None);

    // round-trip candidates through their file format before scoring
    let mut cand_text = Vec::new();
    for ((tag, ipa), d) in inputs.iter().zip(&decoded) {
        let d = d.as_ref().unwrap();
        assert_eq!(d.beam_width, 15);
        write_candidates(&mut cand_text, tag, ipa.as_str(), &d.candidates).unwrap();
    }
    let cands = load_external_candidates(std::str::from_utf8(&cand_text).unwrap()).unwrap();
    let items: Vec<EvalItem> = split
        .test
        .iter()
        .zip(&inputs)
        .map(|(e, (tag, ipa))| EvalItem {
            lang: e.lang.clone(),
            tag: tag.clone(),
            ipa: ipa.clone(),
            reference: e.grapheme.clone(),
            candidates: cands[&(tag.clone(), ipa.as_str().to_string())].clone(),
        })
        .collect();
    let report = stratify(&items, &[1, 5]).unwrap();
    assert_eq!(report.overall.n_samples, 40);
    let pooled: usize = report.languages.iter().map(|r| r.n_samples).sum();
    assert_eq!(pooled, 40);
    assert!(report.overall.top_n_wer[1].wer.mean <= report.overall.top_n_wer[0].wer.mean);
    // an in-domain model should spell a clear majority of held-out words within five tries
    assert!(
        report.overall.top_n_wer[1].wer.mean < 0.5,
        "{:?}",
        report.overall
    );

    let mut out = Vec::new();
    write_lexicon(&mut out, split.test.iter()).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 40);
}
