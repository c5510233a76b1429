import numpy as np
import pytest

from glvq import cli, container, pipeline
from glvq.codebook import GroupCodec, quantize_columns, reconstruct, reshape_group
from glvq import companding

FAST = ["--max-iters", "40"]


def write_pair(tmp_path, name, array):
    path = str(tmp_path / f"{name}.f32")
    container.write_tensor_file(path, array)
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


# ---------------------------------------------------------------- pipeline

def test_quantize_matrix_balanced_allocation():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((64, 256))
    x = rng.standard_normal((256, 32))
    cfg = pipeline.RunConfig(dim=4, bits=2.0, group_width=64, max_iters=20)
    result = pipeline.quantize_matrix(w, x, cfg)
    assert len(result.records) == 4
    assert result.bits.mean() == 2.0
    assert (result.bits == 3).sum() == (result.bits == 1).sum()
    w_hat = pipeline.dequantize_records(result.records)
    assert w_hat.shape == w.shape


def test_quantize_matrix_uniform_when_disabled():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((32, 128))
    x = rng.standard_normal((128, 16))
    cfg = pipeline.RunConfig(dim=4, bits=3.0, group_width=32, bit_alloc=False,
                             max_iters=10)
    result = pipeline.quantize_matrix(w, x, cfg)
    assert np.array_equal(result.bits, np.full(4, 3))


def test_quantize_matrix_fractional_target():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((32, 128))
    x = rng.standard_normal((128, 16))
    cfg = pipeline.RunConfig(dim=4, bits=1.5, group_width=32, max_iters=10)
    result = pipeline.quantize_matrix(w, x, cfg)
    assert set(np.unique(result.bits)) == {1, 2}
    assert result.mean_bits() == 1.5


def test_quantize_matrix_fractional_needs_allocation():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((16, 64))
    x = rng.standard_normal((64, 8))
    cfg = pipeline.RunConfig(dim=4, bits=1.5, group_width=32, bit_alloc=False)
    with pytest.raises(ValueError):
        pipeline.quantize_matrix(w, x, cfg)


def test_evaluate_metrics_shape_checks():
    rng = np.random.default_rng(4)
    w = rng.standard_normal((16, 32))
    x = rng.standard_normal((32, 8))
    cfg = pipeline.RunConfig(dim=4, bits=2.0, group_width=32, bit_alloc=False,
                             max_iters=10)
    result = pipeline.quantize_matrix(w, x, cfg)
    arch = container.read_archive(result.archive_bytes())
    metrics = pipeline.evaluate(w, arch, x)
    assert metrics["bits_per_weight"] == 2.0
    assert metrics["output_mse"] >= 0.0
    with pytest.raises(ValueError):
        pipeline.evaluate(w[:, :-1], arch, x)


# --------------------------------------------------------------------- cli

def test_cli_quantize_dequantize_eval(tmp_path, capsys):
    rng = np.random.default_rng(5)
    w = rng.standard_normal((64, 256))
    x = rng.standard_normal((256, 32))
    wpath = write_pair(tmp_path, "w", w)
    xpath = write_pair(tmp_path, "x", x)
    arch = tmp_path / "model.glvq"
    report = tmp_path / "report.csv"
    code = run(["quantize", wpath, xpath, "--out", arch, "--report", report,
                "--dim", 4, "--group-width", 64, "--bits", 2] + FAST)
    assert code == 0
    out = capsys.readouterr().out
    assert "mean bits/weight: 2.0000" in out
    assert report.exists()

    parsed = container.read_archive(arch.read_bytes())
    bits = np.array([g.codec.bits for g in parsed])
    assert bits.mean() == 2.0
    assert (bits == 3).sum() == (bits == 1).sum()

    dq = tmp_path / "west.f32"
    assert run(["dequantize", arch, "--out", dq]) == 0
    back = container.read_tensor_file(str(dq))
    decoded = parsed.decode_matrix()
    assert np.array_equal(back, decoded.astype(np.float32).astype(float))

    assert run(["eval", wpath, arch, xpath]) == 0
    out = capsys.readouterr().out
    assert "output_mse" in out and "bits_per_weight" in out


def test_cli_no_bit_alloc_uniform(tmp_path):
    rng = np.random.default_rng(6)
    w = rng.standard_normal((32, 128))
    x = rng.standard_normal((128, 16))
    wpath = write_pair(tmp_path, "w", w)
    xpath = write_pair(tmp_path, "x", x)
    arch = tmp_path / "u.glvq"
    assert run(["quantize", wpath, xpath, "--out", arch, "--dim", 4,
                "--group-width", 32, "--bits", 2, "--no-bit-alloc"] + FAST) == 0
    parsed = container.read_archive(arch.read_bytes())
    assert all(g.codec.bits == 2 for g in parsed)


def test_cli_fractional_bits(tmp_path):
    rng = np.random.default_rng(7)
    w = rng.standard_normal((32, 128))
    x = rng.standard_normal((128, 16))
    wpath = write_pair(tmp_path, "w", w)
    xpath = write_pair(tmp_path, "x", x)
    arch = tmp_path / "f.glvq"
    assert run(["quantize", wpath, xpath, "--out", arch, "--dim", 4,
                "--group-width", 32, "--bits", 1.5] + FAST) == 0
    parsed = container.read_archive(arch.read_bytes())
    assert set(g.codec.bits for g in parsed) == {1, 2}


def test_cli_determinism(tmp_path):
    rng = np.random.default_rng(8)
    w = rng.standard_normal((32, 128))
    x = rng.standard_normal((128, 16))
    wpath = write_pair(tmp_path, "w", w)
    xpath = write_pair(tmp_path, "x", x)
    outs = []
    reports = []
    for i in (1, 2):
        arch = tmp_path / f"a{i}.glvq"
        rep = tmp_path / f"r{i}.csv"
        assert run(["quantize", wpath, xpath, "--out", arch, "--report", rep,
                    "--dim", 4, "--group-width", 32, "--bits", 2,
                    "--seed", 7] + FAST) == 0
        outs.append(arch.read_bytes())
        reports.append(rep.read_bytes())
    assert outs[0] == outs[1]
    assert reports[0] == reports[1]


def test_cli_representable_round_trip(tmp_path):
    # archive with fp16-exact side info: quantize -> dequantize is exact
    rng = np.random.default_rng(9)
    basis = np.float16(0.25 * np.eye(4) +
                       0.0625 * rng.integers(-2, 3, size=(4, 4))).astype(float)
    codec = GroupCodec(basis=basis, mu=64.0, bits=3, scale=0.5, dim=4,
                       pad=0, rows=8, cols=4)
    codes = rng.integers(-4, 4, size=(4, 8))
    w = reconstruct(codes, codec)
    lat, _ = reshape_group(w, 4)
    z = quantize_columns(companding.compand(lat / codec.scale, codec.mu), codec)
    assert np.array_equal(z, codes)

    arch_path = tmp_path / "fix.glvq"
    arch_path.write_bytes(container.write_archive([(codec, codes)]))
    out = tmp_path / "back.f32"
    assert run(["dequantize", arch_path, "--out", out]) == 0
    back = container.read_tensor_file(str(out))
    denom = np.maximum(np.abs(w), 1e-12)
    assert (np.abs(back - w) / denom).max() <= 1e-3


def test_cli_zero_archive(tmp_path):
    codec = GroupCodec(basis=0.5 * np.eye(2), mu=0.0, bits=2, scale=1.0,
                       dim=2, pad=0, rows=4, cols=2)
    arch_path = tmp_path / "zero.glvq"
    arch_path.write_bytes(
        container.write_archive([(codec, np.zeros((2, 4), int))]))
    out = tmp_path / "zero.f32"
    assert run(["dequantize", arch_path, "--out", out]) == 0
    assert not container.read_tensor_file(str(out)).any()


def test_cli_truncated_archive_no_partial_output(tmp_path):
    rng = np.random.default_rng(10)
    codec = GroupCodec(basis=np.eye(2), mu=0.0, bits=2, scale=1.0, dim=2,
                       pad=0, rows=4, cols=2)
    data = container.write_archive([(codec, rng.integers(-2, 2, (2, 4)))])
    bad = tmp_path / "bad.glvq"
    bad.write_bytes(data[:-2])
    out = tmp_path / "never.f32"
    assert run(["dequantize", bad, "--out", out]) == 3
    assert not out.exists()


def test_eval_weight_mse_independent_of_calib_size():
    rng = np.random.default_rng(20)
    w = rng.standard_normal((16, 32))
    x = rng.standard_normal((32, 8))
    cfg = pipeline.RunConfig(dim=4, bits=2.0, group_width=32, bit_alloc=False,
                             max_iters=10)
    arch = container.read_archive(
        pipeline.quantize_matrix(w, x, cfg).archive_bytes())
    m1 = pipeline.evaluate(w, arch, x)
    m2 = pipeline.evaluate(w, arch, np.hstack([x, x]))
    assert m1["weight_mse"] == m2["weight_mse"]
    assert m1["kl"] >= 0.0 and m2["kl"] >= 0.0


def test_eval_near_lossless_at_8_bits(tmp_path):
    # d=1, b=8, no companding: a fine scalar grid, so all errors are tiny
    rng = np.random.default_rng(21)
    w = rng.uniform(-1, 1, size=(16, 16))
    x = rng.standard_normal((16, 8))
    cfg = pipeline.RunConfig(dim=1, bits=8.0, group_width=16, bit_alloc=False,
                             companding=False, max_iters=30)
    arch = container.read_archive(
        pipeline.quantize_matrix(w, x, cfg).archive_bytes())
    metrics = pipeline.evaluate(w, arch, x)
    signal = float((w**2).mean())
    assert metrics["weight_mse"] <= 1e-4 * signal
    assert metrics["kl"] <= 1e-4
    assert metrics["bits_per_weight"] == 8.0


def test_cli_missing_file_is_data_error(tmp_path):
    out = tmp_path / "x.glvq"
    assert run(["quantize", str(tmp_path / "no.f32"), str(tmp_path / "no2.f32"),
                "--out", out]) == 3


def test_cli_shape_mismatch_is_data_error(tmp_path):
    rng = np.random.default_rng(11)
    wpath = write_pair(tmp_path, "w", rng.standard_normal((8, 16)))
    xpath = write_pair(tmp_path, "x", rng.standard_normal((12, 4)))
    assert run(["quantize", wpath, xpath, "--out", tmp_path / "y.glvq"]) == 3


def test_cli_invalid_config_is_usage_error(tmp_path):
    rng = np.random.default_rng(12)
    wpath = write_pair(tmp_path, "w", rng.standard_normal((8, 16)))
    xpath = write_pair(tmp_path, "x", rng.standard_normal((16, 4)))
    assert run(["quantize", wpath, xpath, "--out", tmp_path / "y.glvq",
                "--dim", 0]) == 2
    # 1-bit integer target cannot satisfy the balanced constraint
    assert run(["quantize", wpath, xpath, "--out", tmp_path / "y.glvq",
                "--dim", 2, "--group-width", 4, "--bits", 1] + FAST) == 2


def test_cli_usage_error_from_argparse():
    with pytest.raises(SystemExit) as exc:
        run(["quantize"])  # missing required arguments
    assert exc.value.code == 2


def test_cli_overhead_single_and_edge(capsys):
    assert run(["overhead", "--dim", 16, "--rows", 4096, "--cols", 128,
                "--bits", 4]) == 0
    out = capsys.readouterr().out
    assert "overhead=0.196%" in out and "0.20" in out
    assert run(["overhead", "--dim", 1, "--rows", 1, "--cols", 1,
                "--bits", 32]) == 0
    assert "overhead=100.000%" in capsys.readouterr().out
    assert run(["overhead"]) == 2  # nothing to compute


def test_cli_overhead_paper_table(capsys):
    assert run(["overhead", "--paper-table"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 7  # header + 6 rows
    row = lines[3].split()  # d=16 n=128
    assert row[:3] == ["16", "4096", "128"]
    assert [float(v) for v in row[3:]] == [0.39, 0.26, 0.20]


def test_cli_ablate_group_size(tmp_path, capsys):
    out = tmp_path / "gs.csv"
    assert run(["ablate", "--preset", "group-size", "--seeds", 1,
                "--max-iters", 5, "--out", out]) == 0
    rows = out.read_text().splitlines()
    header = rows[0].split(",")
    idx_w = header.index("group_width")
    idx_o = header.index("overhead_pct")
    widths = [int(r.split(",")[idx_w]) for r in rows[1:]]
    overheads = [float(r.split(",")[idx_o]) for r in rows[1:]]
    assert widths == [32, 64, 128, 256, 512]
    assert all(a > b for a, b in zip(overheads, overheads[1:]))


def test_cli_ablate_rounding_quick(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert run(["ablate", "--preset", "rounding", "--seeds", 3,
                "--max-iters", 15, "--out", out]) == 0
    text = capsys.readouterr().out
    assert "babai < gcd" in text
    rows = out.read_text().splitlines()
    assert len(rows) == 1 + 3 * 2  # header + 2 arms per seed


def test_cli_ablate_companding_gaussian_emits_csv(capsys):
    # direction may be neutral on light tails; the CSV must still be valid
    assert run(["ablate", "--preset", "companding", "--seeds", 2,
                "--source", "gaussian", "--max-iters", 10]) == 0
    out = capsys.readouterr().out
    all_lines = [l for l in out.splitlines() if "," in l]
    header = all_lines[0].split(",")
    assert {"preset", "seed", "arm", "output_mse"} <= set(header)
    csv_lines = [l for l in all_lines if l.count(",") == len(header) - 1]
    assert len(csv_lines) == 1 + 2 * 2


def test_cli_ablate_unknown_preset():
    with pytest.raises(SystemExit) as exc:
        run(["ablate", "--preset", "nope"])
    assert exc.value.code == 2
