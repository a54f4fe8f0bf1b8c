#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "slidelm/curation/curation.hpp"
#include "slidelm/encoder/patch_encoder.hpp"
#include "slidelm/error.hpp"
#include "slidelm/evaluation/baselines.hpp"
#include "slidelm/evaluation/judge.hpp"
#include "slidelm/evaluation/metrics.hpp"
#include "slidelm/evaluation/taxonomy.hpp"
#include "slidelm/evaluation/vqa.hpp"
#include "slidelm/interpret/saliency.hpp"
#include "slidelm/numerics/checkpoint.hpp"
#include "slidelm/slide_io/manifest.hpp"
#include "slidelm/slide_io/synth.hpp"
#include "slidelm/training/synthetic_corpus.hpp"
#include "slidelm/util/hash.hpp"

namespace slidelm::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

/// An input file named on the command line or in the config does not exist.
class MissingInput : public LoadError {
 public:
  using LoadError::LoadError;
};

struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::vector<fs::path> outputs;
  std::ostream* out = nullptr;

  std::string input(const std::string& p) const {
    fs::path path(p);
    if (!cfg.paths.data_root.empty() && path.is_relative()) path = fs::path(cfg.paths.data_root) / path;
    if (!fs::exists(path)) throw MissingInput("input '" + path.string() + "' does not exist");
    return path.string();
  }

  fs::path output(const std::string& name) {
    fs::path p = out_dir / name;
    fs::create_directories(p.parent_path());
    outputs.push_back(p);
    return p;
  }
};

struct LoadedSlide {
  SlideManifest manifest;
  PatchGrid grid;
  SlideFeatures features;
};

std::vector<std::string> expand_manifests(const Context& ctx, const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& a : args) {
    std::string p = ctx.input(a);
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".manifest") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw MissingInput("no .manifest files in '" + p + "'");
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<LoadedSlide> load_slides(const Context& ctx, const std::vector<std::string>& args, std::size_t dim) {
  std::vector<LoadedSlide> slides;
  std::vector<SlideManifest> manifests;
  for (const auto& path : expand_manifests(ctx, args)) {
    LoadedSlide s;
    s.manifest = read_manifest(path);
    if (!s.manifest.embeddings_path) throw LoadError(path + ": no embeddings; run `slidelm encode` first");
    s.grid = read_patch_grid(s.manifest.grid_path);
    s.features.embeddings = load_embeddings(*s.manifest.embeddings_path, dim, s.grid.tissue_count());
    s.features.tiles = s.grid.tissue_entries();
    manifests.push_back(s.manifest);
    slides.push_back(std::move(s));
  }
  check_unique_slide_ids(manifests);
  return slides;
}

SlideFeatureMap feature_map(const std::vector<LoadedSlide>& slides) {
  SlideFeatureMap m;
  for (const auto& s : slides) m[s.manifest.slide_id] = s.features;
  return m;
}

std::string rel(const fs::path& target, const fs::path& base) {
  return fs::proximate(fs::absolute(target), fs::absolute(base)).generic_string();
}

void write_json_lines(const fs::path& path, const std::vector<ojson>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot write '" + path.string() + "'");
  for (const auto& r : rows) f << r.dump() << '\n';
}

std::vector<json> read_json_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::vector<json> rows;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw LoadError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

std::string mc_prompt(const QARecord& r) {
  return r.type == QuestionType::multi_choice ? text_only_prompt(r.question, r.options) : r.question;
}

std::shared_ptr<ChatClient> make_chat_client(const RunConfig& cfg) {
  if (!cfg.chat.replay.empty()) return std::make_shared<ReplayChatClient>(cfg.chat.replay);
  return std::make_shared<HttpChatClient>(cfg.chat.http);
}

using PredictionMap = std::map<std::string, std::optional<char>>;

void write_predictions(Context& ctx, const PredictionMap& preds, const std::map<std::string, std::string>& replies = {}) {
  std::vector<ojson> rows;
  for (const auto& [id, c] : preds) {
    ojson j;
    j["id"] = id;
    j["choice"] = c ? json(std::string(1, *c)) : json(nullptr);
    if (auto it = replies.find(id); it != replies.end()) j["reply"] = it->second;
    rows.push_back(std::move(j));
  }
  write_json_lines(ctx.output("predictions.jsonl"), rows);
}

void write_vqa_reports(Context& ctx, const std::vector<QARecord>& records, const PredictionMap& preds) {
  auto report = vqa_eval(records, preds);
  write_vqa_results(ctx.output("results.csv").string(), records, preds);
  write_vqa_summary(ctx.output("summary.csv").string(), report);
  *ctx.out << format_report(report);
}

// ---- commands ----

struct SynthArgs {
  std::string layout, id = "slide";
  std::size_t cases = 0;
};

void cmd_synth(Context& ctx, const SynthArgs& a) {
  if (a.layout.empty() == (a.cases == 0)) throw UsageError("synth: give exactly one of --layout or --cases");
  auto emit = [&](const std::string& id, const SynthSpec& spec) {
    auto s = synth_slide(ctx.cfg.seed + 1, spec);
    write_pnm(ctx.output(id + ".ppm").string(), s.raster);
    std::ofstream labels(ctx.output(id + ".labels.csv"), std::ios::binary);
    labels << "row,col,label\n";
    const std::size_t cols = spec.width / spec.patch_size;
    for (std::size_t i = 0; i < s.tile_labels.size(); ++i)
      labels << i / cols << ',' << i % cols << ',' << to_string(s.tile_labels[i]) << '\n';
  };
  if (!a.layout.empty()) {
    emit(a.id, parse_synth_layout(a.layout));
    return;
  }
  auto cases = synthetic_cases(a.cases, ctx.cfg.seed, ctx.cfg.model.patch.patch_size);
  std::vector<TrainSample> samples;
  std::vector<ojson> refs;
  for (const auto& c : cases) {
    emit(c.slide_id, c.spec);
    samples.push_back({c.slide_id, TaskKind::caption, kDescribePrompt, c.caption});
    samples.push_back({c.slide_id, TaskKind::vqa, kDescribePrompt, c.caption});
    ojson r;
    r["slide_id"] = c.slide_id;
    r["caption"] = c.caption;
    refs.push_back(std::move(r));
  }
  write_train_samples(ctx.output("train.jsonl").string(), samples);
  write_json_lines(ctx.output("references.jsonl"), refs);
}

struct TileArgs {
  std::string slide, id;
};

void cmd_tile(Context& ctx, const TileArgs& a) {
  const std::string path = ctx.input(a.slide);
  const std::string id = a.id.empty() ? fs::path(path).stem().string() : a.id;
  Raster r = read_pnm(path);
  PatchGrid grid = tile_slide(r, ctx.cfg.patch_size(), ctx.cfg.tissue, static_cast<unsigned>(ctx.cfg.jobs));
  auto grid_path = ctx.output(id + ".grid.txt");
  write_patch_grid(grid_path.string(), grid);
  SlideManifest m;
  m.slide_id = id;
  m.raster_path = rel(path, ctx.out_dir);
  m.grid_path = rel(grid_path, ctx.out_dir);
  write_manifest(ctx.output(id + ".manifest").string(), m);
  *ctx.out << id << ": " << grid.entries.size() << " candidate tiles, " << grid.tissue_count() << " tissue\n";
}

void cmd_encode(Context& ctx, const std::vector<std::string>& manifests) {
  ParameterStore store;
  PatchEncoder encoder(store, ctx.cfg.model.patch);
  for (const auto& mpath : expand_manifests(ctx, manifests)) {
    SlideManifest m = read_manifest(mpath);
    PatchGrid grid = read_patch_grid(m.grid_path);
    if (grid.patch_size != ctx.cfg.model.patch.patch_size)
      throw ConfigError("model.patch_encoder.patch_size", "grid was tiled with patch size " +
                                                              std::to_string(grid.patch_size));
    EmbeddingMatrix e = encoder.encode_slide(read_pnm(m.raster_path), grid);
    auto emb_path = ctx.output(m.slide_id + ".semb");
    save_embeddings(emb_path.string(), e);
    SlideManifest out = m;
    out.raster_path = rel(m.raster_path, ctx.out_dir);
    out.grid_path = rel(m.grid_path, ctx.out_dir);
    out.embeddings_path = rel(emb_path, ctx.out_dir);
    write_manifest(ctx.output(m.slide_id + ".manifest").string(), out);
    *ctx.out << m.slide_id << ": " << e.n_patches() << " x " << e.dim() << " embeddings\n";
  }
}

struct TrainArgs {
  std::string data, init;
  std::vector<std::string> slides;
  int stage = 1;
  std::optional<std::size_t> epochs, max_steps;
  std::optional<double> lr;
};

void cmd_train(Context& ctx, const TrainArgs& a) {
  if (a.stage != 1 && a.stage != 2) throw ConfigError("train.stage", "must be 1 or 2");
  auto all = read_train_samples(ctx.input(a.data));
  auto data = samples_for_stage(all, a.stage);
  if (data.empty()) throw UsageError("train: no samples for stage " + std::to_string(a.stage));

  std::unique_ptr<SlideLanguageModel> model;
  if (!a.init.empty()) {
    model = std::make_unique<SlideLanguageModel>(SlideLanguageModel::from_checkpoint(load_checkpoint(ctx.input(a.init))));
  } else {
    std::vector<std::string> texts;
    for (const auto& s : all) texts.push_back(s.prompt), texts.push_back(s.target);
    texts.emplace_back(kDescribePrompt);
    model = std::make_unique<SlideLanguageModel>(ctx.cfg.model, Vocab::build(texts), ctx.cfg.seed);
    save_checkpoint(ctx.output("init.ckpt").string(), model->checkpoint({{"stage", "0"}}));
  }
  auto slides = load_slides(ctx, a.slides, model->config().patch.dim);

  StageConfig sc = a.stage == 1 ? ctx.cfg.stage1 : ctx.cfg.stage2;
  sc.stage = a.stage;
  sc.seed = ctx.cfg.seed;
  if (a.epochs) sc.epochs = *a.epochs;
  if (a.max_steps) sc.max_steps = *a.max_steps;
  if (a.lr) sc.optimizer.lr = *a.lr;
  sc.validate("train.stage" + std::to_string(a.stage));

  auto result = run_stage(*model, sc, data, feature_map(slides), ctx.out_dir.string());
  for (const auto& c : result.checkpoints) ctx.outputs.push_back(c);
  if (!result.best_checkpoint.empty()) ctx.outputs.push_back(result.best_checkpoint);
  write_loss_csv(ctx.output("loss.csv").string(), result.losses);
  *ctx.out << "stage " << a.stage << ": " << result.losses.size() << " steps, final loss "
           << (result.losses.empty() ? 0.0 : result.losses.back().loss) << "\n";
}

struct InferArgs {
  std::string checkpoint, benchmark, prompt = kDescribePrompt;
  std::vector<std::string> slides;
  std::optional<std::size_t> max_len;
};

void cmd_infer(Context& ctx, const InferArgs& a) {
  auto model = SlideLanguageModel::from_checkpoint(load_checkpoint(ctx.input(a.checkpoint)));
  auto slides = load_slides(ctx, a.slides, model.config().patch.dim);
  GenerationConfig gen = ctx.cfg.generation;
  if (a.max_len) gen.max_len = *a.max_len;
  std::map<std::string, const LoadedSlide*> by_id;
  for (const auto& s : slides) by_id[s.manifest.slide_id] = &s;

  if (!a.benchmark.empty()) {
    gen.capture_attention = false;
    auto records = read_benchmark(ctx.input(a.benchmark));
    PredictionMap preds;
    std::map<std::string, std::string> replies;
    for (const auto& r : records) {
      auto it = by_id.find(r.slide_id);
      if (it == by_id.end() || r.type != QuestionType::multi_choice) continue;
      const auto& f = it->second->features;
      auto res = model.generate(f.embeddings, f.tiles, mc_prompt(r), gen);
      replies[r.id] = model.vocab().detokenize(res.ids);
      preds[r.id] = extract_choice(replies[r.id], r.options);
    }
    write_predictions(ctx, preds, replies);
    *ctx.out << preds.size() << " predictions\n";
    return;
  }
  std::vector<ojson> rows;
  for (const auto& s : slides) {
    auto res = model.generate(s.features.embeddings, s.features.tiles, a.prompt, gen);
    ojson j;
    j["slide_id"] = s.manifest.slide_id;
    j["prompt"] = a.prompt;
    j["output"] = model.vocab().detokenize(res.ids);
    j["hit_eos"] = res.hit_eos;
    auto trace_path = ctx.output("traces/" + s.manifest.slide_id + ".json");
    save_attention_trace(trace_path.string(), res.trace);
    j["trace"] = rel(trace_path, ctx.out_dir);
    *ctx.out << s.manifest.slide_id << ": " << j["output"].get<std::string>() << "\n";
    rows.push_back(std::move(j));
  }
  write_json_lines(ctx.output("generations.jsonl"), rows);
}

struct CaptionEvalArgs {
  std::string predictions, references;
  bool judge = false;
};

void cmd_caption_eval(Context& ctx, const CaptionEvalArgs& a) {
  std::map<std::string, std::string> refs;
  for (const auto& j : read_json_lines(ctx.input(a.references))) {
    std::string text = j.contains("caption") ? j.at("caption").get<std::string>() : j.at("target").get<std::string>();
    if (j.value("task", std::string("caption")) == "caption") refs[j.at("slide_id").get<std::string>()] = text;
  }
  std::vector<std::string> ids, cands, references;
  for (const auto& j : read_json_lines(ctx.input(a.predictions))) {
    const auto id = j.at("slide_id").get<std::string>();
    auto it = refs.find(id);
    if (it == refs.end()) throw UsageError("caption-eval: no reference for slide '" + id + "'");
    ids.push_back(id);
    cands.push_back(j.at("output").get<std::string>());
    references.push_back(it->second);
  }
  auto scores = caption_scores(cands, references);
  {
    std::ofstream f(ctx.output("caption_scores.csv"), std::ios::binary);
    f << "slide_id,bleu1,bleu2,bleu3,bleu4,rouge_l\n";
    f.precision(17);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      f << ids[i];
      for (int n = 1; n <= 4; ++n) f << ',' << bleu(cands[i], {references[i]}, n);
      f << ',' << rouge_l(cands[i], references[i]) << '\n';
    }
  }
  std::ofstream f(ctx.output("caption_summary.csv"), std::ios::binary);
  f << "metric,value\n";
  f.precision(17);
  for (int n = 1; n <= 4; ++n) f << "bleu" << n << ',' << scores.bleu[n - 1] << '\n';
  f << "rouge_l," << scores.rouge_l << '\n' << "count," << scores.count << '\n';
  *ctx.out << "BLEU-1 " << scores.bleu[0] << "  BLEU-4 " << scores.bleu[3] << "  ROUGE-L " << scores.rouge_l << "\n";
  if (a.judge) {
    auto client = make_chat_client(ctx.cfg);
    JudgeConfig jc;
    jc.model = ctx.cfg.chat.model;
    jc.temperature = ctx.cfg.chat.temperature;
    auto js = judge_captions(cands, references, *client, jc, ctx.cfg.jobs);
    f << "judge_mean," << js.mean << '\n'
      << "judge_missing," << js.missing << '\n'
      << "judge_prompt_version," << kJudgePromptVersion << '\n'
      << "judge_prompt_sha256," << judge_prompt_hash() << '\n';
    *ctx.out << "judge score " << js.mean << " (" << js.missing << " missing)\n";
  }
}

struct VqaEvalArgs {
  std::string benchmark, predictor = "file", predictions;
};

PredictionMap read_predictions(const std::string& path, const std::vector<QARecord>& records) {
  std::map<std::string, const QARecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  PredictionMap preds;
  for (const auto& j : read_json_lines(path)) {
    const auto id = j.at("id").get<std::string>();
    std::optional<char> choice;
    if (j.contains("choice")) {
      const auto& c = j.at("choice");
      if (c.is_string() && c.get<std::string>().size() == 1) choice = c.get<std::string>()[0];
    } else if (j.contains("reply")) {
      auto it = by_id.find(id);
      if (it != by_id.end()) choice = extract_choice(j.at("reply").get<std::string>(), it->second->options);
    }
    preds[id] = choice;
  }
  return preds;
}

void cmd_vqa_eval(Context& ctx, const VqaEvalArgs& a) {
  auto records = read_benchmark(ctx.input(a.benchmark));
  PredictionMap preds;
  if (a.predictor == "random") {
    preds = random_predictions(records, ctx.cfg.seed);
  } else if (a.predictor == "file") {
    if (a.predictions.empty()) throw UsageError("vqa-eval: --predictions is required with --predictor file");
    preds = read_predictions(ctx.input(a.predictions), records);
  } else {
    throw UsageError("vqa-eval: unknown predictor '" + a.predictor + "'");
  }
  write_vqa_reports(ctx, records, preds);
}

struct BaselineArgs {
  std::string kind, benchmark, checkpoint;
  std::vector<std::string> slides;
  std::size_t k = kMajorityVotePatches;
};

void cmd_baseline(Context& ctx, const BaselineArgs& a) {
  auto records = read_benchmark(ctx.input(a.benchmark));
  PredictionMap preds;
  std::map<std::string, std::string> replies;
  if (a.kind == "random") {
    preds = random_predictions(records, ctx.cfg.seed);
  } else if (a.kind == "text-only") {
    auto client = make_chat_client(ctx.cfg);
    for (const auto& r : records) {
      if (r.type != QuestionType::multi_choice) continue;
      preds[r.id] = text_only_baseline(r.question, r.options, [&](const std::string& prompt) {
        ChatRequest req{ctx.cfg.chat.model, {{"user", prompt}}, ctx.cfg.chat.temperature};
        return replies[r.id] = client->complete(req);
      });
    }
  } else if (a.kind == "majority" || a.kind == "thumbnail") {
    if (a.checkpoint.empty()) throw UsageError("baseline: --checkpoint is required for " + a.kind);
    auto model = SlideLanguageModel::from_checkpoint(load_checkpoint(ctx.input(a.checkpoint)));
    auto slides = load_slides(ctx, a.slides, model.config().patch.dim);
    std::map<std::string, const LoadedSlide*> by_id;
    for (const auto& s : slides) by_id[s.manifest.slide_id] = &s;
    GenerationConfig gen = ctx.cfg.generation;
    gen.capture_attention = false;
    const std::size_t dim = model.config().patch.dim;
    auto ask = [&](const std::vector<double>& feature, const QARecord& r) {
      EmbeddingMatrix e{Tensor({1, dim}, feature)};
      std::vector<PatchEntry> tile{PatchEntry{0, 0, 0, 0, true}};
      return model.vocab().detokenize(model.generate(e, tile, mc_prompt(r), gen).ids);
    };
    for (const auto& r : records) {
      auto it = by_id.find(r.slide_id);
      if (it == by_id.end() || r.type != QuestionType::multi_choice) continue;
      const auto& f = it->second->features;
      if (a.kind == "majority") {
        preds[r.id] = majority_vote_baseline(
            f.embeddings.n_patches(),
            [&](std::size_t i) {
              auto row = f.embeddings.values.row(i);
              return extract_choice(ask({row.begin(), row.end()}, r), r.options);
            },
            ctx.cfg.seed, a.k);
      } else {
        const std::size_t p = model.config().patch.patch_size;
        preds[r.id] = thumbnail_baseline(read_pnm(it->second->manifest.raster_path), r.options, [&](const Raster& thumb) {
          return replies[r.id] = ask(model.patch_encoder().encode(resize_area(thumb, p, p)), r);
        });
      }
    }
  } else {
    throw UsageError("baseline: unknown kind '" + a.kind + "' (random, text-only, majority, thumbnail)");
  }
  write_predictions(ctx, preds, replies);
  write_vqa_reports(ctx, records, preds);
}

struct InterpretArgs {
  std::string trace, manifest;
  std::optional<std::size_t> k;
};

void cmd_interpret(Context& ctx, const InterpretArgs& a) {
  auto trace = load_attention_trace(ctx.input(a.trace));
  auto m = read_manifest(ctx.input(a.manifest));
  auto grid = read_patch_grid(m.grid_path);
  if (trace.n_patches != grid.tissue_count())
    throw UsageError("interpret: trace has " + std::to_string(trace.n_patches) + " patches, grid has " +
                     std::to_string(grid.tissue_count()));
  SaliencyOptions opt;
  opt.k = a.k.value_or(ctx.cfg.saliency_k);
  auto sal = saliency(trace, opt);
  if (!sal.warning.empty()) *ctx.out << "warning: " << sal.warning << "\n";
  write_saliency_csv(ctx.output("saliency.csv").string(), grid, sal);
  Raster thumb = thumbnail(read_pnm(m.raster_path), ctx.cfg.thumbnail_size);
  write_pnm(ctx.output("overlay.ppm").string(), render_overlay(thumb, grid, sal));
  for (std::size_t i = 0; i < sal.ranked.size(); ++i)
    *ctx.out << i + 1 << ": patch " << sal.ranked[i].patch_index << " score " << sal.ranked[i].score << "\n";
}

struct CurateArgs {
  std::string reports, labels, cache, replay;
};

void cmd_curate(Context& ctx, const CurateArgs& a) {
  if (a.reports.empty() == a.labels.empty()) throw UsageError("curate: give exactly one of --reports or --labels");
  if (!a.labels.empty()) {
    std::ifstream in(ctx.input(a.labels));
    std::string line;
    std::getline(in, line);  // header slide_id,task,label
    std::vector<QARecord> records;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw LoadError(a.labels + ":" + std::to_string(n) + ": expected slide_id,task,label");
      const std::string slide = line.substr(0, c1), task = line.substr(c1 + 1, c2 - c1 - 1), label = line.substr(c2 + 1);
      const LabelTask* t = nullptr;
      for (const auto& lt : label_tasks())
        if (lt.name == task) t = &lt;
      if (!t) throw UsageError(a.labels + ":" + std::to_string(n) + ": unknown label task '" + task + "'");
      records.push_back(labels_to_vqa(task, {t->labels.begin(), t->labels.end()}, label, slide));
    }
    write_benchmark(ctx.output("benchmark.jsonl").string(), records);
    *ctx.out << records.size() << " label-derived records\n";
    return;
  }
  RunConfig cfg = ctx.cfg;
  if (!a.replay.empty()) cfg.chat.replay = ctx.input(a.replay);
  auto client = make_chat_client(cfg);
  const fs::path cache_path = a.cache.empty() ? ctx.out_dir / "cache.jsonl" : fs::path(a.cache);
  ResponseCache cache(cache_path.string());
  CurationOptions opt;
  opt.call.cache = &cache;
  opt.call.retries = cfg.curation_retries;
  opt.call.temperature = cfg.chat.temperature;
  opt.jobs = cfg.jobs;
  opt.seed = cfg.seed;
  std::vector<ModelHandle> filters;
  for (const auto& m : cfg.chat.filter_models) filters.push_back({client.get(), m});
  auto out = run_curation(read_reports(ctx.input(a.reports)), {client.get(), cfg.chat.model}, filters, opt);
  for (const auto& p : write_curation_outputs(ctx.out_dir.string(), out)) ctx.outputs.emplace_back(p);
  *ctx.out << out.candidates.size() << " candidates, " << out.benchmark.size() << " benchmark records, "
           << out.train_samples.size() << " training samples\n";
}

// Merges with an existing manifest so several invocations can share one
// output directory.
void write_run_manifest(const Context& ctx, const std::string& command) {
  std::vector<fs::path> files = ctx.outputs;
  const fs::path path = ctx.out_dir / "run_manifest.json";
  std::vector<std::string> commands{command};
  if (std::ifstream prev(path); prev) {
    try {
      auto j = json::parse(prev);
      for (const auto& c : j.at("commands")) commands.push_back(c.get<std::string>());
      for (const auto& e : j.at("outputs")) files.push_back(ctx.out_dir / e.at("path").get<std::string>());
    } catch (const json::exception&) {
    }
  }
  std::sort(commands.begin(), commands.end());
  commands.erase(std::unique(commands.begin(), commands.end()), commands.end());
  ojson j;
  j["commands"] = commands;
  j["seed"] = ctx.cfg.seed;
  j["outputs"] = ojson::array();
  for (auto& f : files) f = f.lexically_normal();
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  for (const auto& f : files) {
    if (!fs::exists(f)) continue;
    ojson e;
    e["path"] = rel(f, ctx.out_dir);
    e["sha256"] = sha256_file(f.string());
    j["outputs"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
}

void error_line(std::ostream& err, int code, const std::string& kind, const std::string& key, const std::string& msg) {
  ojson j;
  j["status"] = "error";
  j["code"] = code;
  j["kind"] = kind;
  j["key"] = key;
  j["message"] = msg;
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slide-level pathology vision-language toolkit", "slidelm"};
  app.require_subcommand(1);
  std::string config_path, out_opt;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::vector<CLI::Option*> seed_opts, jobs_opts;
  // Global flags are accepted before or after the subcommand name.
  auto add_globals = [&](CLI::App* a) {
    seed_opts.push_back(a->add_option("--seed", seed, "Seed for every random choice (overrides config 'seed')"));
    jobs_opts.push_back(
        a->add_option("--jobs", jobs, "Worker thread cap (overrides config 'jobs')")->check(CLI::PositiveNumber));
    a->add_option("--config", config_path, "JSON run configuration");
  };
  add_globals(&app);

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("-o,--out", out_opt, "Output directory");
    add_globals(sub);
  };

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate synthetic slides with known tissue layouts");
  s_synth->add_option("--layout", synth.layout, "WxH[@P]:kind@x,y,w,h;...");
  s_synth->add_option("--id", synth.id, "Slide id for --layout");
  s_synth->add_option("--cases", synth.cases, "Generate this many captioned slides plus train/reference files");
  add_out(s_synth);

  TileArgs tile;
  auto* s_tile = app.add_subcommand("tile", "Cut a slide raster into patches and flag tissue");
  s_tile->add_option("--slide", tile.slide, "PPM/PGM raster")->required();
  s_tile->add_option("--id", tile.id, "Slide id (default: file stem)");
  add_out(s_tile);

  std::vector<std::string> encode_manifests;
  auto* s_encode = app.add_subcommand("encode", "Embed tissue patches with the frozen patch encoder");
  s_encode->add_option("--manifest", encode_manifests, "Slide manifest(s) or directories of them")->required();
  add_out(s_encode);

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "Run one training stage");
  s_train->add_option("--data", train.data, "Training samples (JSONL)")->required();
  s_train->add_option("--slides", train.slides, "Encoded slide manifest(s) or directories")->required();
  s_train->add_option("--stage", train.stage, "1 = alignment, 2 = instruction tuning")->required();
  s_train->add_option("--init", train.init, "Start from this checkpoint instead of a fresh model");
  s_train->add_option("--epochs", train.epochs, "Override epochs");
  s_train->add_option("--max-steps", train.max_steps, "Override the optimizer step cap");
  s_train->add_option("--lr", train.lr, "Override the learning rate");
  add_out(s_train);

  InferArgs infer;
  auto* s_infer = app.add_subcommand("infer", "Generate text for slides");
  s_infer->add_option("--checkpoint", infer.checkpoint, "Model checkpoint")->required();
  s_infer->add_option("--slides", infer.slides, "Encoded slide manifest(s) or directories")->required();
  s_infer->add_option("--prompt", infer.prompt, "Instruction (ignored with --benchmark)");
  s_infer->add_option("--benchmark", infer.benchmark, "Answer these closed-set questions instead");
  s_infer->add_option("--max-len", infer.max_len, "Maximum generated tokens");
  add_out(s_infer);

  CaptionEvalArgs ceval;
  auto* s_ceval = app.add_subcommand("caption-eval", "BLEU-1..4, ROUGE-L and optional judge score");
  s_ceval->add_option("--predictions", ceval.predictions, "JSONL with slide_id, output")->required();
  s_ceval->add_option("--references", ceval.references, "JSONL with slide_id, caption (or target)")->required();
  s_ceval->add_flag("--judge", ceval.judge, "Also score with the configured chat model");
  add_out(s_ceval);

  VqaEvalArgs veval;
  auto* s_veval = app.add_subcommand("vqa-eval", "Closed-set accuracy by category");
  s_veval->add_option("--benchmark", veval.benchmark, "Benchmark JSONL")->required();
  s_veval->add_option("--predictor", veval.predictor, "file | random")->check(CLI::IsMember({"file", "random"}));
  s_veval->add_option("--predictions", veval.predictions, "JSONL with id and choice or reply");
  add_out(s_veval);

  BaselineArgs base;
  auto* s_base = app.add_subcommand("baseline", "Reference predictors over a benchmark");
  s_base->add_option("--kind", base.kind, "random | text-only | majority | thumbnail")
      ->required()
      ->check(CLI::IsMember({"random", "text-only", "majority", "thumbnail"}));
  s_base->add_option("--benchmark", base.benchmark, "Benchmark JSONL")->required();
  s_base->add_option("--checkpoint", base.checkpoint, "Model for majority / thumbnail");
  s_base->add_option("--slides", base.slides, "Encoded slide manifests for majority / thumbnail");
  s_base->add_option("--k", base.k, "Patches sampled per slide for majority voting")->check(CLI::PositiveNumber);
  add_out(s_base);

  InterpretArgs interp;
  auto* s_interp = app.add_subcommand("interpret", "Top-k patch saliency from an attention trace");
  s_interp->add_option("--trace", interp.trace, "Attention trace JSON from infer")->required();
  s_interp->add_option("--manifest", interp.manifest, "Manifest of the traced slide")->required();
  s_interp->add_option("--k", interp.k, "Patches to highlight")->check(CLI::PositiveNumber);
  add_out(s_interp);

  CurateArgs curate;
  auto* s_curate = app.add_subcommand("curate", "Build instruction and benchmark data from reports or labels");
  s_curate->add_option("--reports", curate.reports, "Reports JSONL");
  s_curate->add_option("--labels", curate.labels, "CSV slide_id,task,label for label-derived questions");
  s_curate->add_option("--cache", curate.cache, "Response cache (default <out>/cache.jsonl)");
  s_curate->add_option("--replay", curate.replay, "Serve chat replies from this replay file");
  add_out(s_curate);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    error_line(err, kBadConfig, "usage", "", e.what());
    return kBadConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Context ctx;
    ctx.out = &out;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw MissingInput("config '" + config_path + "' does not exist");
      ctx.cfg = RunConfig::load(config_path);
    }
    auto given = [](const std::vector<CLI::Option*>& opts) {
      return std::any_of(opts.begin(), opts.end(), [](CLI::Option* o) { return o->count() > 0; });
    };
    if (given(seed_opts)) ctx.cfg.seed = seed;
    if (given(jobs_opts)) ctx.cfg.jobs = jobs;
    {
      ModelConfig probe = ctx.cfg.model;
      probe.finalize(Vocab::kSpecialCount + 1);
    }
    if (!out_opt.empty()) ctx.out_dir = out_opt;
    else if (command == "train" && !ctx.cfg.paths.checkpoints.empty()) ctx.out_dir = ctx.cfg.paths.checkpoints;
    else ctx.out_dir = fs::path(ctx.cfg.paths.outputs) / command;
    fs::create_directories(ctx.out_dir);

    if (command == "synth") cmd_synth(ctx, synth);
    else if (command == "tile") cmd_tile(ctx, tile);
    else if (command == "encode") cmd_encode(ctx, encode_manifests);
    else if (command == "train") cmd_train(ctx, train);
    else if (command == "infer") cmd_infer(ctx, infer);
    else if (command == "caption-eval") cmd_caption_eval(ctx, ceval);
    else if (command == "vqa-eval") cmd_vqa_eval(ctx, veval);
    else if (command == "baseline") cmd_baseline(ctx, base);
    else if (command == "interpret") cmd_interpret(ctx, interp);
    else if (command == "curate") cmd_curate(ctx, curate);
    write_run_manifest(ctx, command);
    return kOk;
  } catch (const ConfigError& e) {
    error_line(err, kBadConfig, "config", e.key_path(), e.what());
    return kBadConfig;
  } catch (const UsageError& e) {
    error_line(err, kBadConfig, "usage", "", e.what());
    return kBadConfig;
  } catch (const LoadError& e) {
    error_line(err, kMissingInput, dynamic_cast<const MissingInput*>(&e) ? "missing_input" : "bad_input", "", e.what());
    return kMissingInput;
  } catch (const ChatError& e) {
    error_line(err, kFailure, "chat", "", e.what());
    return kFailure;
  } catch (const std::exception& e) {
    error_line(err, kFailure, "runtime", "", e.what());
    return kFailure;
  }
}

}  // namespace slidelm::cli
