#include <CLI11.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "proca/errors.hpp"
#include "proca/plot.hpp"
#include "proca/retrieval.hpp"
#include "proca/synthdata.hpp"
#include "proca/training.hpp"

namespace fs = std::filesystem;
using namespace proca;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void echo(const std::string& command, const std::vector<std::pair<std::string, std::string>>& fields) {
  std::cout << "# " << command << "\n";
  for (const auto& [k, v] : fields) std::cout << k << " = " << v << "\n";
  std::cout << std::flush;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  SynthOptions options;
  fs::path out;
};

int run_synth(const SynthArgs& a) {
  echo("synth", {{"out", a.out.string()},
                 {"places", std::to_string(a.options.n_places)},
                 {"domains", std::to_string(a.options.domain_count)},
                 {"views", std::to_string(a.options.views_per_place)},
                 {"size", std::to_string(a.options.size)},
                 {"seed", std::to_string(a.options.seed)},
                 {"database_domain", std::to_string(a.options.database_domain)}});
  const auto manifest = build_synthetic_dataset(a.options, a.out);
  std::cout << "wrote " << manifest.records.size() << " records to " << (a.out / "manifest.txt").string() << "\n";
  return kOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path config;
  fs::path resume;
  std::optional<int64_t> steps;
  std::optional<uint64_t> seed;
  std::string ablation = "full";
  std::vector<std::string> overrides;
};

TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig cfg = TrainConfig::desk();
  if (!a.config.empty()) cfg = TrainConfig::from_file(a.config, cfg);
  std::map<std::string, std::string> kv;
  for (const auto& o : a.overrides) {
    const auto parsed = parse_key_values(o);
    kv.insert(parsed.begin(), parsed.end());
  }
  cfg = TrainConfig::from_map(kv, cfg);
  if (a.steps) cfg.total_steps = *a.steps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.ablation == "appearance-only") {
    cfg.anti_occlusion_enabled = false;
  } else if (a.ablation == "occlusion-only") {
    cfg.appearance_enabled = false;
  } else if (a.ablation != "full") {
    throw CLI::ValidationError("--ablation", "expected full, appearance-only or occlusion-only");
  }
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const auto cfg = resolve_train_config(a);
  std::cout << "# train\n"
            << "data = " << a.data.string() << "\n"
            << "out = " << a.out.string() << "\n"
            << "resume = " << a.resume.string() << "\n"
            << "ablation = " << a.ablation << "\n"
            << cfg.to_text() << std::flush;

  const auto dataset = ImageDataset::open(a.data, cfg.image_size);
  const auto data = TrainingSet::from_dataset(dataset, cfg.domain_count());
  fs::create_directories(a.out);
  const auto checkpoint = a.out / "checkpoint.pt";
  const auto log_path = a.out / "loss.ndjson";

  std::optional<Trainer> trainer;
  std::ofstream log;
  if (!a.resume.empty()) {
    trainer.emplace(Trainer::resume(a.resume, &cfg));
    log.open(log_path, std::ios::app);
  } else {
    trainer.emplace(cfg);
    log.open(log_path, std::ios::trunc);
    log << log_header_line(cfg) << "\n";
  }
  if (!log) throw DataError("cannot write " + log_path.string());

  while (trainer->step() < cfg.total_steps) {
    const auto report = trainer->train_step(data);
    log << report_json_line(report) << "\n" << std::flush;
    if (cfg.checkpoint_every > 0 && report.step % cfg.checkpoint_every == 0) trainer->save(checkpoint);
    if (report.step % 50 == 0 || report.step == cfg.total_steps) {
      std::cout << "step " << report.step << " total " << report.generator.total << " d_total "
                << report.discriminator.total << "\n"
                << std::flush;
    }
  }
  trainer->save(checkpoint);
  std::cout << "checkpoint " << checkpoint.string() << " at step " << trainer->step() << "\n";
  return kOk;
}

// ---- index / query / eval --------------------------------------------------

struct IndexArgs {
  fs::path checkpoint, database, out;
};

int run_index(const IndexArgs& a) {
  echo("index", {{"checkpoint", a.checkpoint.string()}, {"database", a.database.string()}, {"out", a.out.string()}});
  const auto ck = load_checkpoint(a.checkpoint);
  const auto db = ImageDataset::open(a.database, ck.config.image_size);
  const auto index = build_index(ck.params, db);
  index.save(a.out);
  std::cout << "indexed " << index.size() << " images, descriptor length " << index.length() << "\n";
  return kOk;
}

struct QueryArgs {
  fs::path index, checkpoint, image;
  int64_t top_k = 5;
};

int run_query(const QueryArgs& a) {
  echo("query", {{"index", a.index.string()},
                 {"checkpoint", a.checkpoint.string()},
                 {"image", a.image.string()},
                 {"top_k", std::to_string(a.top_k)}});
  const auto index = DescriptorIndex::load(a.index);
  const auto ck = load_checkpoint(a.checkpoint);
  const auto image = read_image(a.image, ck.config.image_size);
  std::cout << std::fixed << std::setprecision(6);
  for (const auto& m : query(index, ck.params, image, a.top_k)) std::cout << m.id << " " << m.similarity << "\n";
  return kOk;
}

struct EvalArgs {
  fs::path index, checkpoint, queries, query_index;
};

int run_eval(const EvalArgs& a) {
  echo("eval", {{"index", a.index.string()},
                {"checkpoint", a.checkpoint.string()},
                {"queries", a.queries.string()},
                {"query_index", a.query_index.string()}});
  const auto index = DescriptorIndex::load(a.index);
  LocalizationResult result;
  if (!a.query_index.empty()) {
    // Pre-encoded queries: both sides must come from the same encoder.
    const auto queries = DescriptorIndex::load(a.query_index);
    if (queries.fingerprint != index.fingerprint) {
      throw ValidationError("query descriptors and index were built by different encoders");
    }
    result = evaluate_localization(index, queries.descriptors, queries.poses);
  } else {
    if (a.checkpoint.empty() || a.queries.empty()) {
      throw CLI::ValidationError("eval", "needs --query-index or both --checkpoint and --queries");
    }
    const auto ck = load_checkpoint(a.checkpoint);
    const auto queries = ImageDataset::open(a.queries, ck.config.image_size);
    result = evaluate_localization(index, queries, ck.params);
  }
  std::ostringstream header;
  for (std::size_t i = 0; i < result.thresholds.size(); ++i) {
    header << (i ? " / " : "") << result.thresholds[i].meters << "m," << result.thresholds[i].degrees << "deg";
  }
  std::cout << header.str() << "\n" << result.format() << "\n";
  return kOk;
}

// ---- plot ------------------------------------------------------------------

struct PlotArgs {
  fs::path log, out, checkpoint, baseline, rows, cols;
  int64_t limit = 32;
};

ImageBatch load_limited(const fs::path& manifest, int64_t size, int64_t limit) {
  const auto ds = ImageDataset::open(manifest, size);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size() && static_cast<int64_t>(i) < limit; ++i) idx.push_back(i);
  if (idx.empty()) throw DataError("manifest " + manifest.string() + " is empty");
  return ds.load_batch(idx);
}

int run_plot(const PlotArgs& a) {
  echo("plot", {{"log", a.log.string()},
                {"out", a.out.string()},
                {"checkpoint", a.checkpoint.string()},
                {"baseline", a.baseline.string()},
                {"rows", a.rows.string()},
                {"cols", a.cols.string()},
                {"limit", std::to_string(a.limit)}});
  fs::create_directories(a.out);
  if (!a.log.empty()) {
    const auto points = plot_loss_curve(read_loss_log(a.log), a.out / "loss_curve.png");
    std::cout << "loss_curve.png: " << points << " points\n";
  }
  if (a.checkpoint.empty()) return kOk;
  if (a.rows.empty()) throw CLI::ValidationError("plot", "--checkpoint needs --rows");

  const auto ck = load_checkpoint(a.checkpoint);
  const auto rows = load_limited(a.rows, ck.config.image_size, a.limit);
  const auto cols = a.cols.empty() ? rows : load_limited(a.cols, ck.config.image_size, a.limit);
  std::optional<Checkpoint> baseline;
  if (!a.baseline.empty()) baseline = load_checkpoint(a.baseline);

  for (auto type : {CodeType::kAll, CodeType::kAppearance, CodeType::kOcclusion, CodeType::kPlace}) {
    // "all" is the entangled baseline's place code when one is given.
    const auto& params = (type == CodeType::kAll && baseline) ? baseline->params : ck.params;
    const auto t = (type == CodeType::kAll && baseline) ? CodeType::kPlace : type;
    const auto m = cross_similarity(encode_code_descriptors(params, rows, t), encode_code_descriptors(params, cols, t));
    const auto name = "similarity_" + code_type_name(type);
    write_heatmap(m, a.out / (name + ".png"));
    write_matrix_text(a.out / (name + ".txt"), m);
    std::cout << name << ".png";
    if (m.size(0) == m.size(1) && m.size(0) > 1) std::cout << " diagonal dominance " << diagonal_dominance(m);
    std::cout << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Place / occlusion / appearance disentanglement toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render the factor-controlled synthetic dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--places", synth.options.n_places, "Number of places")->check(CLI::PositiveNumber);
  s->add_option("--domains", synth.options.domain_count, "Appearance domains")->check(CLI::Range(2, 64));
  s->add_option("--views", synth.options.views_per_place, "Views per cell")->check(CLI::PositiveNumber);
  s->add_option("--size", synth.options.size, "Image side in pixels")->check(CLI::Range(8, 4096));
  s->add_option("--seed", synth.options.seed, "Seed");
  s->add_option("--database-domain", synth.options.database_domain, "Appearance domain of the database cell");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the model on a manifest");
  t->add_option("--data", train.data, "Training manifest")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output directory (checkpoint.pt, loss.ndjson)")->required();
  t->add_option("--config", train.config, "key = value config file")->check(CLI::ExistingFile);
  t->add_option("--resume", train.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  t->add_option("--steps", train.steps, "Total steps (overrides total_steps)");
  t->add_option("--seed", train.seed, "Seed (overrides seed)");
  t->add_option("--ablation", train.ablation, "full | appearance-only | occlusion-only");
  t->add_option("--set", train.overrides, "Extra key=value config entries");

  IndexArgs index;
  auto* i = app.add_subcommand("index", "Encode a database manifest into a descriptor index");
  i->add_option("--checkpoint", index.checkpoint)->required()->check(CLI::ExistingFile);
  i->add_option("--database", index.database)->required()->check(CLI::ExistingFile);
  i->add_option("--out", index.out)->required();

  QueryArgs q;
  auto* qc = app.add_subcommand("query", "Rank database images for one query image");
  qc->add_option("--index", q.index)->required()->check(CLI::ExistingFile);
  qc->add_option("--checkpoint", q.checkpoint)->required()->check(CLI::ExistingFile);
  qc->add_option("--image", q.image)->required()->check(CLI::ExistingFile);
  qc->add_option("--top-k", q.top_k)->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Localization accuracy at the three pose thresholds");
  e->add_option("--index", ev.index)->required()->check(CLI::ExistingFile);
  e->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
  e->add_option("--queries", ev.queries, "Query manifest")->check(CLI::ExistingFile);
  e->add_option("--query-index", ev.query_index, "Pre-encoded query descriptors")->check(CLI::ExistingFile);

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Loss curve and similarity heat maps");
  p->add_option("--out", plot.out)->required();
  p->add_option("--log", plot.log, "Loss log (loss.ndjson)")->check(CLI::ExistingFile);
  p->add_option("--checkpoint", plot.checkpoint)->check(CLI::ExistingFile);
  p->add_option("--baseline", plot.baseline, "Entangled baseline checkpoint for the 'all' panel")
      ->check(CLI::ExistingFile);
  p->add_option("--rows", plot.rows, "Manifest of the matrix rows")->check(CLI::ExistingFile);
  p->add_option("--cols", plot.cols, "Manifest of the matrix columns (default: rows)")->check(CLI::ExistingFile);
  p->add_option("--limit", plot.limit, "Images taken from each manifest")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (s->parsed()) return run_synth(synth);
    if (t->parsed()) return run_train(train);
    if (i->parsed()) return run_index(index);
    if (qc->parsed()) return run_query(q);
    if (e->parsed()) return run_eval(ev);
    if (p->parsed()) return run_plot(plot);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n" << app.help();
    return kUsage;
  } catch (const NumericError& err) {
    std::cerr << "numeric failure in loss '" << err.term() << "': " << err.what() << "\n";
    return kNumeric;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kData;
  }
  return kUsage;
}
