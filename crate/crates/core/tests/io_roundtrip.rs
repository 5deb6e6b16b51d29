use ftr_align::io::{load_model, load_pair, write_model, IoError, ModelFile, PriceFile};
use ftr_align::netmodel::Market;
use ftr_align::random::{random_block_pair, random_model, random_prices, rng};
use ftr_align::scenarios::build_toy;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_models_round_trip(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed));
        let dir = tempfile::tempdir().unwrap();
        for name in ["m.toml", "m.json"] {
            let path = dir.path().join(name);
            write_model(&model, &path).unwrap();
            prop_assert_eq!(load_model(&path).unwrap(), model.clone());
        }
    }

    #[test]
    fn block_pairs_round_trip(seed in any::<u64>()) {
        let (small, big) = random_block_pair(&mut rng(seed));
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("dam.toml"), dir.path().join("ftr.toml"));
        write_model(&small, &a).unwrap();
        write_model(&big, &b).unwrap();
        let (dam, ftr) = load_pair(&a, &b).unwrap();
        prop_assert_eq!(dam, small);
        prop_assert_eq!(ftr, big);
    }

    #[test]
    fn prices_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_model(&mut r);
        let y = random_prices(&mut r, model.rows());
        let text = toml::to_string(&PriceFile::from_vector(&model, &y, None)).unwrap();
        let back: PriceFile = toml::from_str(&text).unwrap();
        prop_assert_eq!(back.vectors(&model).unwrap(), vec![y]);
    }
}

#[test]
fn pair_with_ftr_only_contingency_is_extended() {
    let toy = build_toy();
    let pair = toy.pairs.iter().find(|p| p.variant.key() == "extra-contingency").unwrap();
    let mut dam_file = ModelFile::from_model(&pair.dam);
    // Drop the unenforced contingencies from the day-ahead file entirely.
    dam_file.contingencies.retain(|c| c.enforced);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("dam.toml"), dir.path().join("ftr.json"));
    std::fs::write(&a, dam_file.to_toml()).unwrap();
    write_model(&pair.ftr, &b).unwrap();
    let (dam, ftr) = load_pair(&a, &b).unwrap();
    assert!(dam.same_geometry(&ftr));
    assert_eq!(dam.contingencies()[0].id, "B");
    assert_eq!(dam, pair.dam);
    assert_eq!(ftr, pair.ftr);
}

#[test]
fn mismatched_networks_are_rejected() {
    let toy = build_toy();
    let pair = &toy.pairs[0];
    let mut other = ModelFile::from_model(&pair.ftr);
    other.lines[0].reactance = 2.0;
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("dam.toml"), dir.path().join("ftr.toml"));
    write_model(&pair.dam, &a).unwrap();
    std::fs::write(&b, other.to_toml()).unwrap();
    assert!(matches!(load_pair(&a, &b), Err(IoError::Incompatible(_))));
    assert_eq!(pair.dam.market(), &Market::Dam);
}
