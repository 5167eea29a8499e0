#include "encinit/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "csv_util.hpp"

namespace encinit {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

pt::ptree read_meta(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw IoError(e.what());
  }
  return tree;
}

template <class T>
T meta_get(const pt::ptree& tree, const std::string& key, const std::string& path) {
  auto v = tree.get_optional<T>(key);
  if (!v) throw IoError("metadata file '" + path + "' lacks key '" + key + "'");
  return *v;
}

void write_meta(const pt::ptree& tree, const std::string& path) {
  try {
    pt::write_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw IoError(e.what());
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void write_dataset_dir(const DatasetSplits& splits, const ExperimentConfig& cfg, const std::string& dir) {
  ensure_dir(dir);
  save_dataset(splits.est, join_path(dir, "est.csv"));
  save_dataset(splits.val, join_path(dir, "val.csv"));
  save_dataset(splits.test, join_path(dir, "test.csv"));
  save_config(cfg, join_path(dir, "manifest.cfg"));
}

DatasetSplits read_dataset_dir(const std::string& dir) {
  const auto manifest = load_config(join_path(dir, "manifest.cfg"));
  const double ts = manifest.data.ts;
  return DatasetSplits{load_dataset(join_path(dir, "est.csv"), ts), load_dataset(join_path(dir, "val.csv"), ts),
                       load_dataset(join_path(dir, "test.csv"), ts)};
}

std::shared_ptr<const MsdBaseline> make_baseline(const ExperimentConfig& cfg) {
  return std::make_shared<const MsdBaseline>(cfg.baseline_params(), cfg.data.ts, cfg.data.substeps());
}

RunStreams run_streams(InitMethod method, Index run) {
  const auto base = 1000 + 100 * static_cast<std::uint64_t>(run) + 10 * static_cast<std::uint64_t>(method);
  return RunStreams{base, base + 1, base + 2, base + 3};
}

InitOutcome initialise_encoder(InitMethod method, const ExperimentConfig& cfg, const NonlinearBaseline& baseline,
                               const IoDataset& est, Index run) {
  const auto streams = run_streams(method, run);
  InitOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(cfg.seed, streams.encoder);
  EncoderNet enc = EncoderNet::random(cfg.n_a, baseline.ny(), cfg.n_b, baseline.nu(), baseline.nx(),
                                      cfg.encoder_hidden, rng);
  switch (method) {
    case InitMethod::random:
      out.encoder = std::move(enc);
      break;
    case InitMethod::model_based:
      out.encoder = init_model_based(enc, baseline);
      break;
    case InitMethod::data_based_lls: {
      auto lls = init_lls(enc, simulate_baseline_default(baseline, est, cfg.n_a, cfg.n_b));
      out.encoder = std::move(lls.encoder);
      out.warnings = std::move(lls.warnings);
      break;
    }
    case InitMethod::data_based_ann: {
      PretrainConfig pc = cfg.pretrain;
      pc.stream = streams.pretrain;
      auto ann = init_ann_pretrain(enc, simulate_baseline_default(baseline, est, cfg.n_a, cfg.n_b), pc);
      out.encoder = std::move(ann.encoder);
      break;
    }
  }
  out.init_ms = elapsed_ms(t0);
  return out;
}

void save_encoder_dir(const InitOutcome& init, InitMethod method, const ExperimentConfig& cfg,
                      const std::string& dir) {
  ensure_dir(dir);
  save_resnet(init.encoder.net(), join_path(dir, "encoder.csv"));
  pt::ptree meta;
  meta.put("method", to_string(method));
  meta.put("n_a", init.encoder.n_a());
  meta.put("n_b", init.encoder.n_b());
  meta.put("n_x", init.encoder.nx());
  meta.put("n_y", init.encoder.ny());
  meta.put("n_u", init.encoder.nu());
  meta.put("init_ms", detail::format_double(init.init_ms));
  meta.put("seed", cfg.seed);
  write_meta(meta, join_path(dir, "encoder.meta"));
}

EncoderNet load_encoder_dir(const std::string& dir) {
  const auto path = join_path(dir, "encoder.meta");
  const auto meta = read_meta(path);
  ResNet net = load_resnet(join_path(dir, "encoder.csv"));
  return EncoderNet(std::move(net), meta_get<Index>(meta, "n_a", path), meta_get<Index>(meta, "n_y", path),
                    meta_get<Index>(meta, "n_b", path), meta_get<Index>(meta, "n_u", path));
}

void save_model_dir(const AugmentedModel& model, const std::string& dir) {
  ensure_dir(dir);
  save_resnet(model.encoder.net(), join_path(dir, "encoder.csv"));
  save_resnet(model.f_aug, join_path(dir, "f_aug.csv"));
  pt::ptree meta;
  meta.put("n_a", model.encoder.n_a());
  meta.put("n_b", model.encoder.n_b());
  meta.put("n_x", model.encoder.nx());
  meta.put("n_y", model.encoder.ny());
  meta.put("n_u", model.encoder.nu());
  write_meta(meta, join_path(dir, "model.meta"));
}

AugmentedModel load_model_dir(const std::string& dir, BaselinePtr baseline) {
  const auto path = join_path(dir, "model.meta");
  const auto meta = read_meta(path);
  EncoderNet enc(load_resnet(join_path(dir, "encoder.csv")), meta_get<Index>(meta, "n_a", path),
                 meta_get<Index>(meta, "n_y", path), meta_get<Index>(meta, "n_b", path),
                 meta_get<Index>(meta, "n_u", path));
  AugmentedModel model{std::move(baseline), load_resnet(join_path(dir, "f_aug.csv")), std::move(enc)};
  model.validate();
  return model;
}

EvalResult evaluate(const AugmentedModel& model, const IoDataset& test, const ExperimentConfig& cfg) {
  EvalResult r;
  r.test_rmse = rmse_simulation(model, test);
  if (!cfg.train.val_horizons.empty()) {
    const Index longest = *std::max_element(cfg.train.val_horizons.begin(), cfg.train.val_horizons.end());
    const auto starts = spaced_starts(model, test.size(), longest, cfg.train.val_sections);
    r.tstep_rmse = tstep_rmse(model, test, starts, cfg.train.val_horizons);
  }
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MonteCarloResult run_montecarlo(const ExperimentConfig& cfg, const DatasetSplits& data, std::ostream* progress) {
  const auto baseline = make_baseline(cfg);
  MonteCarloResult mc;
  for (InitMethod m : cfg.mc_methods)
    for (Index r = 0; r < cfg.mc_runs; ++r) {
      RunRecord rec;
      rec.method = m;
      rec.run = r;
      mc.runs.push_back(std::move(rec));
    }

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < mc.runs.size(); i = next++) {
      RunRecord& rec = mc.runs[i];
      const auto streams = run_streams(rec.method, rec.run);
      try {
        auto init = initialise_encoder(rec.method, cfg, *baseline, data.est, rec.run);
        rec.init_ms = init.init_ms;
        rec.initialised = true;
        RngStream aug_rng(cfg.seed, streams.augmentation);
        auto model = AugmentedModel::create(baseline, std::move(init.encoder), aug_rng, cfg.augmentation_hidden);
        TrainConfig tc = cfg.train;
        tc.stream = streams.train;
        auto trained = train(model, data.est, data.val, tc);
        rec.history = std::move(trained.history);
        rec.test_rmse = rmse_simulation(trained.model, data.test);
        rec.ok = std::isfinite(rec.test_rmse);
        if (!rec.ok) rec.error = "non-finite test RMSE";
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
      if (progress) {
        std::lock_guard lock(log_mutex);
        *progress << to_string(rec.method) << " run " << rec.run << ": "
                  << (rec.ok ? "test rmse " + detail::format_double(rec.test_rmse) : "failed: " + rec.error)
                  << "\n"
                  << std::flush;
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max<Index>(1, cfg.mc_workers));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, mc.runs.size()); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return mc;
}

void write_montecarlo(const MonteCarloResult& mc, const ExperimentConfig& cfg, const std::string& dir) {
  using detail::format_double;
  ensure_dir(dir);
  const auto& horizons = cfg.train.val_horizons;
  {
    auto os = detail::open_out(join_path(dir, "runs.csv"));
    os << "method,run,status,init_ms,test_rmse,error\n";
    for (const auto& r : mc.runs) {
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      os << to_string(r.method) << ',' << r.run << ',' << (r.ok ? "ok" : "failed") << ','
         << format_double(r.init_ms) << ',' << format_double(r.ok ? r.test_rmse : std::nan("")) << ',' << err
         << '\n';
    }
  }
  auto summary = detail::open_out(join_path(dir, "summary.csv"));
  summary << "method,runs_ok,runs_failed,rmse_min,rmse_median,rmse_max,init_ms_median\n";
  auto curves = detail::open_out(join_path(dir, "curves.csv"));
  curves << "method,epoch";
  for (Index h : horizons) curves << ",val_rmse_T" << h;
  curves << '\n';

  for (InitMethod m : cfg.mc_methods) {
    std::vector<const RunRecord*> ok;
    Index failed = 0;
    for (const auto& r : mc.runs) {
      if (r.method != m) continue;
      if (r.ok) ok.push_back(&r);
      else ++failed;
    }
    std::vector<double> rmse, init_ms;
    for (const auto* r : ok) {
      rmse.push_back(r->test_rmse);
      init_ms.push_back(r->init_ms);
    }
    const double lo = rmse.empty() ? std::nan("") : *std::min_element(rmse.begin(), rmse.end());
    const double hi = rmse.empty() ? std::nan("") : *std::max_element(rmse.begin(), rmse.end());
    summary << to_string(m) << ',' << ok.size() << ',' << failed << ',' << format_double(lo) << ','
            << format_double(median(rmse)) << ',' << format_double(hi) << ',' << format_double(median(init_ms))
            << '\n';

    std::size_t epochs = 0;
    for (const auto* r : ok) epochs = std::max(epochs, r->history.size());
    for (std::size_t e = 0; e < epochs; ++e) {
      curves << to_string(m) << ',' << e;
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        std::vector<double> vals;
        for (const auto* r : ok)
          if (e < r->history.size()) vals.push_back(r->history[e].val_rmse[h]);
        curves << ',' << format_double(median(vals));
      }
      curves << '\n';
    }
  }
}

DatasetSplits cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  auto splits = make_datasets(cfg.system, cfg.data);
  write_dataset_dir(splits, cfg, out_dir);
  return splits;
}

InitOutcome cmd_init(const ExperimentConfig& cfg, InitMethod method, const std::string& dataset_dir,
                     const std::string& out_dir) {
  cfg.validate();
  const auto data = read_dataset_dir(dataset_dir);
  const auto baseline = make_baseline(cfg);
  auto init = initialise_encoder(method, cfg, *baseline, data.est);
  save_encoder_dir(init, method, cfg, out_dir);
  return init;
}

TrainResult cmd_train(const ExperimentConfig& cfg, const std::string& dataset_dir, const std::string& encoder_dir,
                      const std::string& out_dir) {
  cfg.validate();
  const auto data = read_dataset_dir(dataset_dir);
  const auto baseline = make_baseline(cfg);
  EncoderNet enc = load_encoder_dir(encoder_dir);
  const auto streams = run_streams(InitMethod::random, 0);
  RngStream aug_rng(cfg.seed, streams.augmentation);
  auto model = AugmentedModel::create(baseline, std::move(enc), aug_rng, cfg.augmentation_hidden);
  TrainConfig tc = cfg.train;
  tc.stream = streams.train;
  auto result = train(model, data.est, data.val, tc);
  save_model_dir(result.model, out_dir);
  auto os = detail::open_out(join_path(out_dir, "history.csv"));
  write_history_csv(result.history, tc.val_horizons, os);
  return result;
}

MonteCarloResult cmd_montecarlo(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream* progress) {
  cfg.validate();
  const auto data = make_datasets(cfg.system, cfg.data);
  write_dataset_dir(data, cfg, join_path(out_dir, "data"));
  auto mc = run_montecarlo(cfg, data, progress);
  write_montecarlo(mc, cfg, out_dir);
  return mc;
}

EvalResult cmd_eval(const ExperimentConfig& cfg, const std::string& dataset_dir, const std::string& model_dir,
                    const std::string& out_dir) {
  cfg.validate();
  const auto data = read_dataset_dir(dataset_dir);
  const auto model = load_model_dir(model_dir, make_baseline(cfg));
  auto r = evaluate(model, data.test, cfg);
  ensure_dir(out_dir);
  auto os = detail::open_out(join_path(out_dir, "eval.csv"));
  os << "metric,value\ntest_rmse_simulation," << detail::format_double(r.test_rmse) << '\n';
  for (std::size_t h = 0; h < r.tstep_rmse.size(); ++h) {
    os << "test_rmse_T" << cfg.train.val_horizons[h] << ',' << detail::format_double(r.tstep_rmse[h]) << '\n';
  }
  return r;
}

}  // namespace encinit
