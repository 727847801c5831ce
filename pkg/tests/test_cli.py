import json
import subprocess
import sys

from blindmimo.cli import main


def write_config(path, **over):
    cfg = {
        "k_users": 4,
        "t_len": 60,
        "n_h": 32,
        "n_v": 1,
        "theta": 0.15,
        "channel_model": "bernoulli_gaussian",
        "trials": 2,
        "base_seed": 7,
        "solver": {"max_iters": 60},
        "sweep": {"param": "snr_db", "values": [10.0, 30.0]},
    }
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return path


class TestSimulate:
    def test_produces_outputs(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "trials.jsonl").exists()
        assert (out / "summary.csv").exists()
        assert (out / "plot_evm_l3.dat").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out1 / "trials.jsonl").read_bytes() == (out2 / "trials.jsonl").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()

    def test_seed_changes_stream(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg), "--out", str(out1)])
        main(["simulate", "--config", str(cfg), "--out", str(out2), "--seed", "8"])
        assert (out1 / "trials.jsonl").read_bytes() != (out2 / "trials.jsonl").read_bytes()

    def test_multiple_methods(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", t_pilot=8,
                           sweep={"param": "snr_db", "values": [30.0]})
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out),
                     "--methods", "l3,pilot"]) == 0
        lines = (out / "trials.jsonl").read_text().splitlines()
        methods = {json.loads(l)["method"] for l in lines}
        assert methods == {"l3", "pilot"}

    def test_bad_config_nonzero_exit(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"k_users": -1}))
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) != 0

    def test_precondition_flag_changes_results(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", t_len=30, n_h=64,
                           sweep={"param": "snr_db", "values": [30.0]})
        out1, out2 = tmp_path / "plain", tmp_path / "pre"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1),
                     "--precondition", "false"]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2),
                     "--precondition", "true"]) == 0
        assert (out1 / "trials.jsonl").read_bytes() != (out2 / "trials.jsonl").read_bytes()


class TestReport:
    def test_round_trip_matches_original_summary(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        re_out = tmp_path / "re"
        assert main(["report", "--records", str(out / "trials.jsonl"),
                     "--out", str(re_out)]) == 0
        assert (re_out / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()
        assert (re_out / "trials.jsonl").read_bytes() == (out / "trials.jsonl").read_bytes()


class TestConcentrationCommand:
    def test_writes_plot_data(self, tmp_path):
        out = tmp_path / "conc"
        assert main(["concentration", "--k-list", "4", "--t-list", "36,54",
                     "--trials", "150", "--out", str(out)]) == 0
        lines = (out / "plot_concentration_k4.dat").read_text().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 3


class TestConvergenceCommand:
    def test_writes_traces_and_summary(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "k_users": 4, "t_len": 60, "n_h": 64, "n_v": 1, "theta": 0.2,
            "channel_model": "bernoulli_gaussian", "sigma_z2": 1e-3,
            "solver": {"max_iters": 80},
            "variants": {"theta_half": {"theta": 0.1}},
        }))
        out = tmp_path / "conv"
        assert main(["convergence", "--config", str(cfg), "--out", str(out),
                     "--trials", "4"]) == 0
        assert (out / "plot_convergence_base.dat").exists()
        assert (out / "plot_convergence_theta_half.dat").exists()
        summary = json.loads((out / "convergence_summary.json").read_text())
        assert set(summary) == {"base", "theta_half"}


class TestConsoleEntryPoint:
    def test_module_invocation(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", trials=1,
                           sweep={"param": "snr_db", "values": [30.0]})
        out = tmp_path / "out"
        proc = subprocess.run(
            [sys.executable, "-m", "blindmimo.cli", "simulate",
             "--config", str(cfg), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "trials.jsonl").exists()
