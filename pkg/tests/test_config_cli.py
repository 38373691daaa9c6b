import csv
import json

import pytest

from sparsevss import cli
from sparsevss.config import ConfigError, parse_config
from sparsevss.estimators import Variant

FAST = ["--runs", "3", "--max-iter", "200", "--window", "50", "--length", "8"]


class TestParseConfig:
    def test_defaults(self):
        spec = parse_config()
        r = spec.run
        assert (r.L, r.T, r.N_t, r.N_r, r.num_runs, r.seed) == (16, 1, 2, 2, 200, 0)
        assert (r.max_iter, r.tol, r.mode) == (5000, 1e-5, "complex")
        assert spec.command == "mse" and spec.format == "both"
        assert [a.variant for a in spec.algorithms] == [
            Variant.ISS_NLMS, Variant.VSS_NLMS, Variant.ZA_VSS_NLMS, Variant.RZA_VSS_NLMS]
        assert set(spec.provenance.values()) == {"default"}

    def test_mu_out_of_range(self):
        with pytest.raises(ConfigError, match=r"mu ∈ \(0,2\)"):
            parse_config(["--mu", "2.5"])

    @pytest.mark.parametrize("snr,C", [(5, 1e-4), (10, 1e-5), (20, 1e-5)])
    def test_C_from_snr(self, snr, C):
        spec = parse_config(["--snr", str(snr)])
        assert spec.resolved_C(float(snr)) == C
        assert spec.run_config(spec.algorithms[1]).effective_algo.C == C
        assert spec.echo()["values"]["C_resolved"] == {str(float(snr)): C}

    def test_C_override(self):
        spec = parse_config(["--snr", "10", "--C", "1e-3"])
        assert spec.resolved_C(10.0) == 1e-3
        assert spec.run_config(spec.algorithms[1]).effective_algo.C == 1e-3

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"L": 8, "stepsize": 0.1}))
        with pytest.raises(ConfigError, match="stepsize"):
            parse_config(file=path)

    def test_precedence_and_provenance(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"L": 8, "num_runs": 10, "snr_db": [5, 10]}))
        spec = parse_config(["--config", str(path), "--runs", "4"])
        assert spec.run.L == 8 and spec.run.num_runs == 4 and spec.snr_db == [5.0, 10.0]
        prov = spec.provenance
        assert (prov["L"], prov["num_runs"], prov["snr_db"], prov["seed"]) == ("file", "flag", "file", "default")

    @pytest.mark.parametrize("argv,match", [
        (["--runs", "0"], "num_runs"),
        (["--beta", "1.5"], "beta"),
        (["--sparsity", "20"], "T"),
        (["--algo", "LMS"], "unknown algorithm"),
        (["--window", "9000"], "window"),
        (["ber", "--modulation", "32QAM"], "unsupported"),
        (["ber", "--nt", "3"], "N_r"),
        (["--runs", "2.5"], "integer"),
    ])
    def test_rejections(self, argv, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(argv)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(file=tmp_path / "nope.json")

    def test_lists(self):
        spec = parse_config(["sweep", "--sparsity", "1,4", "--gammas", "0,1e-5"])
        assert spec.sparsity == [1, 4] and spec.options["gammas"] == [0.0, 1e-5]
        assert [a.variant.value for a in spec.algorithms] == ["ZA_VSS_NLMS", "RZA_VSS_NLMS"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestRun:
    def test_mse_outputs(self, tmp_path):
        out = tmp_path / "mse"
        assert cli.main(["mse", "--snr", "20", "--out", str(out), *FAST]) == 0
        csvs = sorted(p.name for p in out.glob("*.csv"))
        assert csvs == [f"mse_{v}_T1_snr20.csv" for v in
                        sorted(["ISS_NLMS", "VSS_NLMS", "ZA_VSS_NLMS", "RZA_VSS_NLMS"])]
        rows = read_csv(out / "mse_VSS_NLMS_T1_snr20.csv")
        assert rows[0] == ["iteration", "mse", "mu_r1", "mu_r2"]
        assert len(rows) == 201 and rows[1][3] == ""
        summary = json.loads((out / "mse_VSS_NLMS_T1_snr20.json").read_text())
        assert {"final_mse", "steady_state_mse", "stop_reasons", "config"} <= set(summary)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["spec"]["values"]["num_runs"] == 3
        assert manifest["spec"]["provenance"]["num_runs"] == "flag"
        assert {"numpy", "python", "sparsevss"} <= set(manifest["versions"])
        for entry in manifest["files"]:
            assert cli.sha256(out / entry["path"]) == entry["sha256"]

    def test_rerun_is_byte_identical(self, tmp_path):
        argv = ["mse", "--algo", "VSS,RZA-VSS", "--snr", "10", "--format", "csv", *FAST]
        for name in ("a", "b"):
            assert cli.main([*argv, "--out", str(tmp_path / name)]) == 0
        for f in (tmp_path / "a").glob("*.csv"):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_step_size_traces(self, tmp_path):
        out = tmp_path / "step"
        argv = ["trace-step-size", "--algo", "VSS", "--step-grid", "0.5,1.0", "--format", "csv",
                "--out", str(out), *FAST]
        assert cli.main(argv) == 0
        names = sorted(p.name for p in out.glob("*.csv"))
        assert names == ["step_VSS_NLMS_step0.5_T1_snr20.csv", "step_VSS_NLMS_step1_T1_snr20.csv"]
        for name, mu_max in zip(names, (0.5, 1.0)):
            mus = [float(r[2]) for r in read_csv(out / name)[1:]]
            assert max(mus) <= mu_max

    def test_ber_outputs(self, tmp_path):
        out = tmp_path / "ber"
        argv = ["ber", "--algo", "ISS", "--snr", "10,20", "--modulation", "16QAM", "--bits", "4096",
                "--out", str(out), "--format", "csv", *FAST]
        assert cli.main(argv) == 0
        rows = read_csv(out / "ber_ISS_NLMS_T1.csv")
        assert rows[0] == ["snr_db", "scheme", "order", "algorithm", "ber", "errors", "bits"]
        assert len(rows) == 3
        assert (out / "ber_PERFECT_CSI_T1.csv").exists()

    def test_sweep_outputs(self, tmp_path):
        out = tmp_path / "sweep"
        argv = ["sweep", "--algo", "ZA-VSS", "--gammas", "0,1e-4", "--snr", "20",
                "--out", str(out), "--format", "csv", *FAST]
        assert cli.main(argv) == 0
        rows = read_csv(out / "sweep_ZA_VSS_NLMS.csv")
        assert rows[0][:4] == ["algorithm", "T", "snr_db", "gamma"] and len(rows) == 3

    def test_plot_renders_png(self, tmp_path):
        out = tmp_path / "plot"
        argv = ["mse", "--algo", "ISS,VSS", "--snr", "20", "--plot", "--out", str(out), *FAST]
        assert cli.main(argv) == 0
        png = out / "mse_T1_snr20.png"
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        names = {e["path"] for e in json.loads((out / "manifest.json").read_text())["files"]}
        assert png.name in names

    def test_config_error_exit(self, tmp_path, capsys):
        assert cli.main(["--mu", "2.5", "--out", str(tmp_path)]) == 2
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["status"] == "error" and "mu ∈ (0,2)" in record["message"]

    def test_runtime_error_record(self, tmp_path, monkeypatch, capsys):
        def boom(spec, report):
            raise FloatingPointError("non-finite MSE at iteration 7 (run seed 0/3)")

        monkeypatch.setitem(cli.COMMANDS, "mse", boom)
        assert cli.main(["mse", "--out", str(tmp_path)]) == 1
        record = json.loads((tmp_path / "error.json").read_text())
        assert record["error"] == "FloatingPointError" and "0/3" in record["message"]
