import pytest

from purisk.config import RunConfig, load_config
from purisk.errors import ConfigError, DataIOError


class TestLoadConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg.seeds == (1, 2, 3)
        assert (cfg.n_folds, cfg.n_bags, cfg.n_trees) == (5, 10, 500)
        assert cfg.corr_threshold == 0.75 and cfg.median_window == 9
        assert cfg.alpha_grid_step == 0.001 and cfg.confidence_cutoff == 0.8

    def test_file_and_overrides(self, tmp_path):
        p = tmp_path / "run.toml"
        p.write_text('dataset = "d.csv"\nseeds = [7, 8]\nn_trees = 20\nbandwidth = 0.05\n')
        cfg = load_config(p, {"n_trees": 30, "threads": None})
        assert cfg.dataset == "d.csv" and cfg.seeds == (7, 8)
        assert cfg.n_trees == 30
        assert cfg.bandwidth_rule() == 0.05

    @pytest.mark.parametrize("text", ['bogus = 1\n', 'n_trees = "many"\n', 'seeds = [1.5]\n',
                                      'median_window = 4\n', 'bandwidth = "wide"\n',
                                      'corr_threshold = 0\n', 'n_trees = \n'])
    def test_rejects(self, tmp_path, text):
        p = tmp_path / "run.toml"
        p.write_text(text)
        with pytest.raises(ConfigError):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIOError):
            load_config(tmp_path / "none.toml")

    def test_forest_config(self):
        fc = RunConfig(n_trees=7, mtry=3, min_node_size=2).forest_config()
        assert (fc.n_trees, fc.mtry, fc.min_node_size) == (7, 3, 2)
