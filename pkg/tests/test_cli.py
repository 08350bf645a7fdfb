import numpy as np
import pytest

from qsgd import decode, encode, load_qsg, to_qsg_bytes
from qsgd.cli import main
from qsgd.rng import substream


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_float32(path, values):
    np.asarray(values, dtype="<f4").tofile(path)
    return str(path)


@pytest.fixture
def vector_file(tmp_path):
    vals = substream(77, "cli-vec").standard_normal(1024)
    return write_float32(tmp_path / "vec.f32", vals)


# ------------------------------------------------------------------ compress


def test_compress_decompress_roundtrip(tmp_path, vector_file, capsys):
    out = tmp_path / "vec.qsg"
    code, stdout, _ = run_cli(
        ["compress", vector_file, "-o", str(out), "--levels", "4", "--bucket-size", "256"],
        capsys,
    )
    assert code == 0
    assert stdout.startswith("# qsgd compress (version 0.1.0)\n")
    assert out.exists()

    raw = tmp_path / "back.f32"
    code, stdout, _ = run_cli(["decompress", str(out), "-o", str(raw)], capsys)
    assert code == 0
    assert stdout.startswith("# qsgd decompress (version 0.1.0)\n")
    values = np.fromfile(raw, dtype="<f4")
    assert len(values) == 1024

    # what was written is exactly the decoded message, re-encodable to the
    # same file image
    message = load_qsg(out)
    again = encode(decode(message))
    assert to_qsg_bytes(again) == out.read_bytes()


def dequantized(path):
    from qsgd import dequantize

    return dequantize(decode(load_qsg(path)))


def test_decompress_output_matches_decoded_values(tmp_path, vector_file, capsys):
    out = tmp_path / "vec.qsg"
    run_cli(["compress", vector_file, "-o", str(out), "--levels", "2"], capsys)
    raw = tmp_path / "back.f32"
    run_cli(["decompress", str(out), "-o", str(raw)], capsys)
    assert np.array_equal(
        np.fromfile(raw, dtype="<f4"), dequantized(out).astype("<f4")
    )


def test_compress_is_deterministic(tmp_path, vector_file, capsys):
    a, b = tmp_path / "a.qsg", tmp_path / "b.qsg"
    code_a, out_a, _ = run_cli(["compress", vector_file, "-o", str(a), "--bits", "5"], capsys)
    code_b, out_b, _ = run_cli(["compress", vector_file, "-o", str(b), "--bits", "5"], capsys)
    assert code_a == code_b == 0
    assert a.read_bytes() == b.read_bytes()
    assert out_a.replace(str(a), "X") == out_b.replace(str(b), "X")


def test_compress_dense_balanced_ratio(tmp_path, vector_file, capsys):
    out = tmp_path / "vec.qsg"
    code, stdout, _ = run_cli(
        ["compress", vector_file, "-o", str(out), "--bits", "5", "--scheme", "dense"],
        capsys,
    )
    assert code == 0
    stats = stdout.strip().splitlines()[-1]
    fields = dict(part.split("=", 1) for part in stats.split())
    assert int(fields["original_bits"]) == 32 * 1024
    assert float(fields["ratio"]) >= 11.3
    assert float(fields["bound_bits"]) == pytest.approx(2899.2)


def test_compress_empty_input_is_a_usage_error(tmp_path, capsys):
    empty = tmp_path / "empty.f32"
    empty.write_bytes(b"")
    code, _, err = run_cli(["compress", str(empty), "-o", str(tmp_path / "x.qsg")], capsys)
    assert code == 2
    assert "usage error" in err


def test_compress_ragged_input_reports_byte_offset(tmp_path, capsys):
    bad = tmp_path / "ragged.f32"
    bad.write_bytes(b"\x00" * 10)
    code, _, err = run_cli(["compress", str(bad), "-o", str(tmp_path / "x.qsg")], capsys)
    assert code == 1
    assert "byte offset 8" in err


def test_compress_rejects_non_finite_values(tmp_path, capsys):
    bad = tmp_path / "nan.f32"
    vals = np.array([1.0, np.nan, 2.0], dtype="<f4")
    vals.tofile(bad)
    code, _, err = run_cli(["compress", str(bad), "-o", str(tmp_path / "x.qsg")], capsys)
    assert code == 1
    assert "byte offset 4" in err


def test_compress_missing_input_fails_cleanly(tmp_path, capsys):
    code, _, err = run_cli(
        ["compress", str(tmp_path / "nope.f32"), "-o", str(tmp_path / "x.qsg")], capsys
    )
    assert code == 1
    assert err.startswith("error:")


def test_decompress_rejects_corrupt_file(tmp_path, capsys):
    bad = tmp_path / "bad.qsg"
    bad.write_bytes(b"QSGX" + b"\x00" * 20)
    code, _, err = run_cli(["decompress", str(bad), "-o", str(tmp_path / "y.f32")], capsys)
    assert code == 1
    assert "magic" in err


# --------------------------------------------------------------- bench-codec


def test_bench_codec_format_and_determinism(tmp_path, capsys):
    args = ["bench-codec", "--n", "64", "--d", "64", "--s", "1", "--trials", "3"]
    code, out, _ = run_cli(args, capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "# qsgd bench-codec (version 0.1.0)"
    assert "trial,bits,nonzeros" in lines
    start = lines.index("trial,bits,nonzeros") + 1
    rows = lines[start : start + 3]
    assert [r.split(",")[0] for r in rows] == ["0", "1", "2"]
    assert lines[-3].startswith("# mean_bits = ")
    assert lines[-2].startswith("# mean_nonzeros = ")
    assert lines[-1].startswith("# bound_bits = ")

    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(args + ["-o", str(f1)], capsys)
    run_cli(args + ["-o", str(f2)], capsys)
    assert f1.read_bytes() == f2.read_bytes()


def test_bench_codec_inapplicable_bound_prints_na(capsys):
    code, out, _ = run_cli(
        ["bench-codec", "--n", "4", "--d", "4", "--s", "32", "--trials", "1"], capsys
    )
    assert code == 0
    assert out.strip().splitlines()[-1] == "# bound_bits = n/a"


def test_bench_codec_rejects_zero_trials(capsys):
    code, _, err = run_cli(
        ["bench-codec", "--n", "4", "--d", "4", "--s", "1", "--trials", "0"], capsys
    )
    assert code == 2
    assert "trials" in err


# --------------------------------------------------------------------- train


TRAIN_SMALL = [
    "train",
    "--set", "objective=least_squares",
    "--set", "n=16",
    "--set", "m=32",
    "--set", "workers=2",
    "--set", "iters=5",
    "--set", "eta=0.05",
    "--set", "quantizer=sparse",
]


def test_train_output_format(capsys):
    code, out, _ = run_cli(TRAIN_SMALL, capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "# qsgd train (version 0.1.0)"
    assert "# eta = 0.05" in lines
    assert any(line.startswith("# eta_resolved = ") for line in lines)
    assert any(line.startswith("# variance_ratio = ") for line in lines)
    header = lines.index("iter,loss,bits_per_worker,cumulative_bits,grad_norm")
    rows = lines[header + 1 :]
    assert len(rows) == 5
    assert [r.split(",")[0] for r in rows] == ["1", "2", "3", "4", "5"]
    cumulative = [int(r.split(",")[3]) for r in rows]
    assert cumulative == sorted(cumulative)


def test_train_determinism(tmp_path, capsys):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(TRAIN_SMALL + ["-o", str(f1)], capsys)
    run_cli(TRAIN_SMALL + ["-o", str(f2)], capsys)
    assert f1.read_bytes() == f2.read_bytes()


def test_train_thread_count_does_not_change_output(tmp_path, capsys, monkeypatch):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("QSGD_THREADS", "1")
    run_cli(TRAIN_SMALL + ["-o", str(f1)], capsys)
    monkeypatch.setenv("QSGD_THREADS", "3")
    run_cli(TRAIN_SMALL + ["-o", str(f2)], capsys)
    assert f1.read_bytes() == f2.read_bytes()


def test_train_tuned_step_is_the_default(capsys):
    code, out, _ = run_cli(
        ["train", "--set", "n=8", "--set", "m=16", "--set", "iters=5"], capsys
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert "# eta = tuned" in lines
    resolved = [l for l in lines if l.startswith("# eta_resolved = ")]
    assert len(resolved) == 1
    assert float(resolved[0].split("=")[1]) > 0


def test_train_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# a comment\n"
        "\n"
        "objective = least_squares\n"
        "n = 8\n"
        "m = 16\n"
        "iters = 4\n"
        "eta = 0.05\n"
    )
    code, out, _ = run_cli(["train", "--config", str(cfg)], capsys)
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[rows.index("iter,loss,bits_per_worker,cumulative_bits,grad_norm") + 1 :]
    assert len(rows) - rows.index("iter,loss,bits_per_worker,cumulative_bits,grad_norm") - 1 == 4

    code, out, _ = run_cli(
        ["train", "--config", str(cfg), "--set", "iters=7"], capsys
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert "# iters = 7" in lines  # the flag wins
    n_rows = len(lines) - lines.index("iter,loss,bits_per_worker,cumulative_bits,grad_norm") - 1
    assert n_rows == 7


def test_train_unknown_key_is_named(capsys):
    code, _, err = run_cli(["train", "--set", "learning_rate=0.1"], capsys)
    assert code == 2
    assert "learning_rate" in err


def test_train_bad_value_is_rejected(capsys):
    code, _, err = run_cli(["train", "--set", "iters=abc"], capsys)
    assert code == 2
    assert "iters" in err


def test_train_bad_config_line_reports_location(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("objective = ridge\njust-a-word\n")
    code, _, err = run_cli(["train", "--config", str(cfg)], capsys)
    assert code == 2
    assert "broken.cfg:2" in err


def test_train_missing_config_file(capsys, tmp_path):
    code, _, err = run_cli(["train", "--config", str(tmp_path / "nope.cfg")], capsys)
    assert code == 1
    assert err.startswith("error:")


def test_train_levels_and_bits_conflict(capsys):
    code, _, err = run_cli(
        ["train", "--set", "quantizer=dense", "--set", "levels=2", "--set", "bits=3"],
        capsys,
    )
    assert code == 2
    assert "levels" in err and "bits" in err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exit_code(capsys):
    code, _, err = run_cli(
        ["train", "--set", "n=8", "--set", "m=16", "--set", "eta=100.0",
         "--set", "iters=400"],
        capsys,
    )
    assert code == 1
    assert "divergence" in err


def test_train_emit_plotdata(tmp_path, capsys):
    plot = tmp_path / "plot.csv"
    code, _, _ = run_cli(TRAIN_SMALL + ["--emit-plotdata", str(plot)], capsys)
    assert code == 0
    lines = plot.read_text().strip().splitlines()
    assert "cumulative_bits,loss" in lines
    assert len(lines) - lines.index("cumulative_bits,loss") - 1 == 5


# ---------------------------------------------------------------------- svrg


SVRG_SMALL = [
    "svrg",
    "--set", "n=16",
    "--set", "m=32",
    "--set", "workers=2",
    "--set", "epochs=2",
    "--set", "iters=30",
]


def test_svrg_output_format(capsys):
    code, out, _ = run_cli(SVRG_SMALL, capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "# qsgd svrg (version 0.1.0)"
    header = lines.index("epoch,suboptimality,bits_per_worker_epoch")
    rows = lines[header + 1 :]
    assert len(rows) == 3
    assert rows[0].startswith("0,") and rows[0].endswith(",0")
    assert [r.split(",")[0] for r in rows] == ["0", "1", "2"]
    subopt = [float(r.split(",")[1]) for r in rows]
    assert subopt[-1] < subopt[0]


def test_svrg_determinism(tmp_path, capsys):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(SVRG_SMALL + ["-o", str(f1)], capsys)
    run_cli(SVRG_SMALL + ["-o", str(f2)], capsys)
    assert f1.read_bytes() == f2.read_bytes()


def test_svrg_needs_known_optimum(capsys):
    code, _, err = run_cli(
        ["svrg", "--set", "objective=nonconvex", "--set", "n=8", "--set", "m=16"], capsys
    )
    assert code == 2
    assert "optimal" in err


# ------------------------------------------------------------------------ gd


def test_gd_output_format(capsys):
    code, out, _ = run_cli(["gd", "--n", "8", "--iters", "10"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "# qsgd gd (version 0.1.0)"
    header = lines.index("iteration,f,bits")
    rows = lines[header + 1 :]
    assert len(rows) == 11
    assert rows[0].split(",")[0] == "0" and rows[0].split(",")[2] == "0"
    fs = [float(r.split(",")[1]) for r in rows]
    assert all(b <= a + 1e-15 for a, b in zip(fs, fs[1:]))
    assert all(int(r.split(",")[2]) > 0 for r in rows[1:])


def test_gd_determinism(tmp_path, capsys):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(["gd", "--n", "8", "--iters", "10", "-o", str(f1)], capsys)
    run_cli(["gd", "--n", "8", "--iters", "10", "-o", str(f2)], capsys)
    assert f1.read_bytes() == f2.read_bytes()


def test_gd_rejects_unknown_objective(capsys):
    code, _, err = run_cli(["gd", "--objective", "mystery"], capsys)
    assert code == 2
    assert "mystery" in err
