use ttscost::arch::{
    first_layer_surcharge, hardware_preset, kv_growth_fit, load_hardware_profile, load_model_config, model_preset,
    ModelFamily,
};
use ttscost::cost::{
    attention_param_ratio, dense_cost, iso_cost_grid, sparse_cost, AttnVariant, CostMode, GenLenStats, IsoCostSpec,
    TtsSetting,
};

#[test]
fn phi_equals_printed_formula() {
    let hw = hardware_preset("b200").unwrap();
    for name in ["Qwen3-0.6B", "Qwen3-8B", "Qwen3-32B"] {
        let m = model_preset(name).unwrap();
        let (p, d, r, i) = (m.active_params(), m.kv_elems_per_token(), m.gqa_ratio(), hw.intensity());
        for (lin, lout) in [(0.0, 4096.0), (1024.0, 16_384.0), (2048.0, 0.0)] {
            let want = (2.0 * r * lin * d + (r * d + i * d) * lout) / (2.0 * p);
            assert_eq!(attention_param_ratio(&m, &hw, lin, lout).unwrap(), want);
        }
    }
}

#[test]
fn preset_surcharge_applies_to_sparse_totals() {
    let m = model_preset("Qwen3-0.6B").unwrap();
    let hw = hardware_preset("b200").unwrap();
    let s = TtsSetting::sparse(4, 2048.0, GenLenStats::scalar(8192.0), AttnVariant::OracleTopK, 256, None);
    let plain = sparse_cost(&m, &hw, &s).unwrap();
    let surcharge = first_layer_surcharge("Qwen3-0.6B").unwrap();
    let charged = sparse_cost(&m, &hw, &s.clone().with_surcharge(surcharge)).unwrap();
    assert!((charged.eflops_additive() / plain.eflops_additive() - 1.0357).abs() < 1e-12);
    assert_eq!(first_layer_surcharge("Qwen3-32B"), Some(0.0156));
}

#[test]
fn eflops_contour_favours_larger_models_at_short_lengths() {
    let hw = hardware_preset("b200").unwrap();
    let fit = kv_growth_fit(&ModelFamily::qwen3_measured()).unwrap();
    let spec = IsoCostSpec {
        d0: fit.predict(8e9),
        p0: 8e9,
        beta: fit.slope,
        gqa_ratio: 4.0,
        prompt_len: 0.0,
        trials: 1,
    };
    let ps: Vec<f64> = (0..=80).map(|i| 0.6e9 * 1e4f64.powf(f64::from(i) / 80.0)).collect();
    let ls: Vec<f64> = (1..=32).map(|i| f64::from(i) * 1024.0).collect();
    // Anchor both contours at the smallest model generating 32K tokens.
    let anchor = iso_cost_grid(&spec, &hw, &[0.6e9], &[32_768.0], &[]).unwrap().cells[0];
    let grid = iso_cost_grid(&spec, &hw, &ps, &ls, &[anchor.eflops, anchor.flops]).unwrap();
    let e = grid.max_params_within(anchor.eflops, 1024.0, CostMode::Eflops).unwrap();
    let f = grid.max_params_within(anchor.flops, 1024.0, CostMode::FlopsOnly).unwrap();
    assert!(e > f, "eflops contour reaches {e:e}, flops-only {f:e}");
    assert_eq!(grid.cells.len(), ps.len() * ls.len());
    assert!(grid
        .contours
        .iter()
        .filter(|c| c.level == anchor.eflops && c.mode == CostMode::Eflops && c.params == 0.6e9)
        .all(|c| (c.gen_len - 32_768.0).abs() < 1e-6));
}

#[test]
fn config_files_override_presets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tiny.toml"),
        "name = \"tiny\"\nactive_params = 1000.0\nkv_elems_per_token = 10.0\ngqa_ratio = 2.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("lab.toml"),
        "name = \"lab\"\npeak_flops = 10.0\nmem_bw_elems = 1.0\n",
    )
    .unwrap();
    let m = load_model_config("tiny", Some(dir.path())).unwrap();
    let hw = load_hardware_profile("lab", Some(dir.path())).unwrap();
    let c = dense_cost(&m, &hw, &TtsSetting::dense(1, 100.0, GenLenStats::scalar(10.0))).unwrap();
    assert_eq!(c.eflops_additive(), 272_000.0);
    let by_path = load_model_config(dir.path().join("tiny.toml").to_str().unwrap(), None).unwrap();
    assert_eq!(by_path, m);
    assert_eq!(load_model_config("Qwen3-8B", Some(dir.path())).unwrap(), model_preset("Qwen3-8B").unwrap());
}
