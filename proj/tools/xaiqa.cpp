#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xaiqa/xaiqa.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace xaiqa;

namespace {

void log(const std::string& msg) { std::cerr << "[xaiqa] " << msg << "\n"; }

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string output_dir;
  std::vector<std::string> sets;
};

// Shared state for one subcommand run: the effective config, the output
// directory and the artifact bookkeeping.
class Context {
 public:
  Context(std::string command, const Globals& g) : command_(std::move(command)) {
    cfg_ = PipelineConfig::load(g.config_path, environ, &pending_);
    for (const auto& s : g.sets) {
      const auto eq = s.find('=');
      const auto dot = s.find('.');
      if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        pending_.push_back("--set expects SECTION.KEY=VALUE, got \"" + s + "\"");
        continue;
      }
      if (auto err = cfg_.try_set_string(s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1))) {
        pending_.push_back("--set " + *err);
      }
    }
    if (g.seed) cfg_.set_all_seeds(*g.seed);
    if (g.workers) cfg_.set("runtime", "workers", *g.workers);
    if (!g.output_dir.empty()) cfg_.set("paths", "output_dir", g.output_dir);
  }

  PipelineConfig& cfg() { return cfg_; }

  // Call after flag overrides are applied.
  void validate() {
    cfg_.validate(pending_);
    out_dir_ = cfg_.get<std::string>("paths", "output_dir");
    if (out_dir_.empty()) fail(ErrorKind::config, "paths.output_dir must be set");
  }

  fs::path out(const std::string& name) const { return out_dir_ / name; }

  fs::path input(const std::string& flag_value, const std::string& fallback, const std::string& what) {
    fs::path p = flag_value.empty() ? fs::path(fallback) : fs::path(flag_value);
    if (p.empty()) fail(ErrorKind::usage, "no " + what + " given");
    if (!fs::is_regular_file(p)) fail(ErrorKind::io, what + " not found: " + p.string());
    inputs_[what] = Json{{"file", p.filename().string()}, {"fnv1a64", text::hex64(text::fnv1a64(read_text(p)))}};
    return p;
  }

  Corpus corpus(const std::string& corpus_flag, const std::string& vocab_flag) {
    const auto c = input(corpus_flag, cfg_.get<std::string>("paths", "corpus"), "corpus");
    const auto v = input(vocab_flag, cfg_.get<std::string>("paths", "vocab"), "vocab");
    return load_corpus(c, v);
  }

  // Metadata sidecar with the config echoed; the wall-clock time goes to a
  // separate run log so artifacts stay byte-identical across runs.
  void record(const fs::path& artifact, const Json& extra = Json::object()) {
    Json meta{{"command", command_},
              {"artifact", artifact.filename().string()},
              {"inputs", inputs_},
              {"config", cfg_.json()}};
    for (const auto& [k, v] : extra.items()) meta[k] = v;
    write_text(artifact.string() + ".meta.json", meta.dump(2) + "\n");

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    fs::create_directories(out_dir_);
    std::ofstream run_log(out_dir_ / "run_log.jsonl", std::ios::app);
    run_log << Json{{"command", command_}, {"artifact", artifact.filename().string()}, {"finished_at", stamp}}.dump()
            << "\n";
    log("wrote " + artifact.string());
  }

 private:
  std::string command_;
  PipelineConfig cfg_;
  fs::path out_dir_;
  std::vector<std::string> pending_;
  Json inputs_ = Json::object();
};

std::unique_ptr<Embedder> make_embedder(const PipelineConfig& cfg, const Corpus& corpus) {
  const auto ec = cfg.embedder_config();
  if (ec.provider == EmbedderProvider::remote) return std::make_unique<RemoteEmbedder>(ec.endpoint, ec.batch_size);
  return std::make_unique<HashingEmbedder>(fit_corpus_embedder(corpus, ec.dim, ec.seed));
}

Json generation_fingerprint(const PipelineConfig& cfg) {
  Json j = cfg.json();
  j.erase("paths");
  j.erase("runtime");
  return j;
}

GoldItem gold_from_pair(const QAPair& p) {
  return GoldItem{pair_item_id(p), p.question, p.doc_id, {GoldAnswer{p.answer.text, p.answer.start}}};
}

// Evaluation items from either a gold file or a pairs file.
std::vector<GoldItem> load_items(const fs::path& path) {
  bool is_gold = false;
  bool first = true;
  read_jsonl(path, [&](const Json& r, std::size_t) {
    if (first) is_gold = r.contains("item_id");
    first = false;
  });
  if (is_gold) return load_gold(path);
  std::vector<GoldItem> out;
  for (const auto& p : load_pairs(path)) out.push_back(gold_from_pair(p));
  return out;
}

void write_pairs(Context& ctx, const fs::path& path, const std::vector<QAPair>& pairs, const std::string& run_id) {
  save_pairs(path, pairs);
  ctx.record(path, Json{{"run_id", run_id}, {"pairs", pairs.size()}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic extractive QA generation and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--seed", g.seed, "seed for every randomized stage");
  app.add_option("--workers", g.workers, "worker threads (0 = all cores)");
  app.add_option("--output-dir", g.output_dir, "directory for artifacts");
  app.add_option("--set", g.sets, "override a config key, SECTION.KEY=VALUE");

  std::function<void()> action;
  std::string corpus_path, vocab_path, out_path;

  const auto add_corpus_flags = [&](CLI::App* sub) {
    sub->add_option("--corpus", corpus_path, "corpus JSON-lines");
    sub->add_option("--vocab", vocab_path, "label vocabulary JSON-lines");
  };

  // train-classifier
  auto* train = app.add_subcommand("train-classifier", "train the builtin TF-IDF logistic classifier");
  add_corpus_flags(train);
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  train->add_option("--epochs", epochs);
  train->add_option("--learning-rate", learning_rate);
  train->add_option("--out", out_path, "model file (default <output-dir>/model.json)");
  train->callback([&] {
    action = [&] {
      Context ctx("train-classifier", g);
      if (epochs) ctx.cfg().set("classifier", "epochs", *epochs);
      if (learning_rate) ctx.cfg().set("classifier", "learning_rate", *learning_rate);
      ctx.validate();
      const auto corpus = ctx.corpus(corpus_path, vocab_path);
      std::vector<std::string> warnings;
      const auto model = train_linear(corpus, ctx.cfg().train_config(), &warnings);
      for (const auto& w : warnings) log("warning: " + w);
      const fs::path path = out_path.empty() ? ctx.out("model.json") : fs::path(out_path);
      save_linear_model(path, model);
      std::vector<std::string> texts;
      for (const auto& d : corpus.documents()) texts.push_back(d.text());
      const auto metrics = evaluate_classifier(model.score(texts), corpus);
      const fs::path metrics_path = path.parent_path() / (path.stem().string() + ".metrics.json");
      write_text(metrics_path, to_json(metrics).dump(2) + "\n");
      ctx.record(path);
      ctx.record(metrics_path);
      std::cout << to_json(metrics).dump() << "\n";
    };
  });

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "masked-sampling importance matrices for every document");
  add_corpus_flags(explain_cmd);
  std::string model_path;
  std::optional<int> num_iterations;
  std::optional<double> mask_probability;
  explain_cmd->add_option("--model", model_path, "model file (default <output-dir>/model.json)");
  explain_cmd->add_option("--num-iterations", num_iterations);
  explain_cmd->add_option("--mask-probability", mask_probability);
  explain_cmd->add_option("--out", out_path);
  explain_cmd->callback([&] {
    action = [&] {
      Context ctx("explain", g);
      if (num_iterations) ctx.cfg().set("explainer", "num_iterations", *num_iterations);
      if (mask_probability) ctx.cfg().set("explainer", "mask_probability", *mask_probability);
      ctx.validate();
      const auto corpus = ctx.corpus(corpus_path, vocab_path);
      std::unique_ptr<Scorer> scorer;
      if (ctx.cfg().get<std::string>("classifier", "scorer") == "remote") {
        scorer = std::make_unique<RemoteScorer>(ctx.cfg().get<std::string>("classifier", "endpoint"),
                                                corpus.vocab().codes(),
                                                ctx.cfg().get<std::size_t>("classifier", "batch_size"));
      } else {
        const auto p = ctx.input(model_path, ctx.out("model.json").string(), "model");
        scorer = std::make_unique<LinearModel>(load_linear_model(p));
      }
      const auto msp = ctx.cfg().msp_config();
      const Json echo = to_json(msp);
      std::vector<Json> rows;
      std::size_t calls = 0;
      for (const auto& doc : corpus.documents()) {
        const auto im = explain(doc, *scorer, msp);
        calls += im.scorer_calls;
        rows.push_back(to_json(im, echo));
      }
      const fs::path path = out_path.empty() ? ctx.out("importance.jsonl") : fs::path(out_path);
      write_jsonl(path, rows);
      ctx.record(path, Json{{"documents", rows.size()}, {"scorer_calls", calls}});
    };
  });

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "generate QA pairs with xaiqa, cosine or random");
  add_corpus_flags(generate_cmd);
  std::string method_flag, importance_path, template_flag;
  generate_cmd->add_option("--method", method_flag, "xaiqa | cosine | random");
  generate_cmd->add_option("--importance", importance_path, "importance file (default <output-dir>/importance.jsonl)");
  generate_cmd->add_option("--template", template_flag, "question template with {X}");
  generate_cmd->add_option("--out", out_path);
  generate_cmd->callback([&] {
    action = [&] {
      Context ctx("generate", g);
      if (!method_flag.empty()) ctx.cfg().set("generation", "method", method_flag);
      if (!template_flag.empty()) ctx.cfg().set("generation", "template", template_flag);
      ctx.validate();
      const auto corpus = ctx.corpus(corpus_path, vocab_path);
      const auto method = parse_method(ctx.cfg().get<std::string>("generation", "method"));
      const auto tmpl = ctx.cfg().get<std::string>("generation", "template");
      const auto run_id = make_run_id(method, generation_fingerprint(ctx.cfg()));
      std::vector<QAPair> pairs;
      if (method == Method::xaiqa) {
        const auto p = ctx.input(importance_path, ctx.out("importance.jsonl").string(), "importance");
        pairs = generate_xaiqa(corpus, load_importance(p), tmpl, run_id);
      } else if (method == Method::cosine) {
        const auto embedder = make_embedder(ctx.cfg(), corpus);
        pairs = generate_cosine(corpus, *embedder, tmpl, run_id);
      } else {
        pairs = generate_random(corpus, ctx.cfg().get<std::uint64_t>("generation", "seed"), tmpl, run_id);
      }
      const fs::path path =
          out_path.empty() ? ctx.out("pairs." + std::string(method_name(method)) + ".jsonl") : fs::path(out_path);
      write_pairs(ctx, path, pairs, run_id);
    };
  });

  // postprocess
  auto* post_cmd = app.add_subcommand("postprocess", "re-split answers on list and semicolon tokens");
  add_corpus_flags(post_cmd);
  std::string pairs_path;
  post_cmd->add_option("--pairs", pairs_path, "pairs file (default <output-dir>/pairs.xaiqa.jsonl)");
  post_cmd->add_option("--out", out_path);
  post_cmd->callback([&] {
    action = [&] {
      Context ctx("postprocess", g);
      ctx.validate();
      const auto corpus = ctx.corpus(corpus_path, vocab_path);
      const auto in = ctx.input(pairs_path, ctx.out("pairs.xaiqa.jsonl").string(), "pairs");
      const auto embedder = make_embedder(ctx.cfg(), corpus);
      const auto pairs = postprocess(load_pairs(in), corpus, *embedder);
      const fs::path path = out_path.empty() ? ctx.out("pairs.xaiqa_pp.jsonl") : fs::path(out_path);
      write_pairs(ctx, path, pairs, pairs.empty() ? std::string{} : pairs.front().run_id);
    };
  });

  // select
  auto* select_cmd = app.add_subcommand("select", "keep the r highest-scored pairs");
  std::optional<std::size_t> r_flag;
  select_cmd->add_option("--pairs", pairs_path, "pairs file")->required();
  select_cmd->add_option("--r", r_flag, "number of pairs to keep");
  select_cmd->add_option("--out", out_path);
  select_cmd->callback([&] {
    action = [&] {
      Context ctx("select", g);
      if (r_flag) ctx.cfg().set("generation", "r", *r_flag);
      ctx.validate();
      const auto in = ctx.input(pairs_path, "", "pairs");
      const auto pairs = select_top_r(load_pairs(in), ctx.cfg().get<std::size_t>("generation", "r"));
      const fs::path path = out_path.empty() ? ctx.out("pairs.selected.jsonl") : fs::path(out_path);
      write_pairs(ctx, path, pairs, pairs.empty() ? std::string{} : pairs.front().run_id);
    };
  });

  // mix
  auto* mix_cmd = app.add_subcommand("mix", "mix base and synthetic pairs at a base:synthetic ratio");
  std::string base_path, synthetic_path, ratio_flag;
  mix_cmd->add_option("--base", base_path)->required();
  mix_cmd->add_option("--synthetic", synthetic_path)->required();
  mix_cmd->add_option("--ratio", ratio_flag, "BASE:SYNTHETIC, e.g. 2:1");
  mix_cmd->add_option("--out", out_path);
  mix_cmd->callback([&] {
    action = [&] {
      Context ctx("mix", g);
      if (!ratio_flag.empty()) ctx.cfg().set("generation", "ratio", ratio_flag);
      ctx.validate();
      const auto base = load_pairs(ctx.input(base_path, "", "base"));
      const auto synthetic = load_pairs(ctx.input(synthetic_path, "", "synthetic"));
      const auto mixed = mix(base, synthetic, parse_ratio(ctx.cfg().get<std::string>("generation", "ratio")),
                             ctx.cfg().get<std::uint64_t>("generation", "seed"));
      const fs::path path = out_path.empty() ? ctx.out("pairs.mixed.jsonl") : fs::path(out_path);
      write_pairs(ctx, path, mixed, "");
    };
  });

  // qclo
  auto* qclo_cmd = app.add_subcommand("qclo", "query-context lexical overlap per item");
  add_corpus_flags(qclo_cmd);
  std::string items_path;
  qclo_cmd->add_option("--items", items_path, "gold or pairs file")->required();
  qclo_cmd->add_option("--out", out_path);
  qclo_cmd->callback([&] {
    action = [&] {
      Context ctx("qclo", g);
      ctx.validate();
      const auto corpus = ctx.corpus(corpus_path, vocab_path);
      const auto items = load_items(ctx.input(items_path, "", "items"));
      const auto qcfg = ctx.cfg().qclo_config();
      std::vector<HardnessRecord> records;
      std::vector<Json> excluded;
      for (const auto& item : items) {
        const Document* doc = corpus.find(item.context_doc_id);
        if (!doc) fail(ErrorKind::input, "item " + item.item_id + " references unknown document " + item.context_doc_id);
        const auto v = qclo(item.question, doc->text(), qcfg);
        if (v) {
          records.push_back({item.item_id, *v});
        } else {
          excluded.push_back(Json{{"item_id", item.item_id}, {"reason", "no question terms left after filtering"}});
        }
      }
      const fs::path path = out_path.empty() ? ctx.out("hardness.jsonl") : fs::path(out_path);
      save_hardness(path, records);
      ctx.record(path, Json{{"items", records.size()}, {"excluded", excluded}, {"qclo_config", to_json(qcfg)}});
      if (!excluded.empty()) log(std::to_string(excluded.size()) + " item(s) excluded with empty question terms");
      if (!records.empty()) {
        for (double f : default_strata_fractions()) {
          const auto subset = hardest_subset(records, f);
          std::printf("hardest %g%%: %zu items, qclo <= %.4f\n", f * 100.0, subset.size(), subset.back().qclo);
        }
      }
    };
  });

  // subset
  auto* subset_cmd = app.add_subcommand("subset", "hardest fraction of a hardness file");
  std::string hardness_path;
  double fraction = 0.0;
  subset_cmd->add_option("--hardness", hardness_path)->required();
  subset_cmd->add_option("--fraction", fraction)->required();
  subset_cmd->add_option("--out", out_path);
  subset_cmd->callback([&] {
    action = [&] {
      Context ctx("subset", g);
      ctx.validate();
      const auto subset = hardest_subset(load_hardness(ctx.input(hardness_path, "", "hardness")), fraction);
      char name[64];
      std::snprintf(name, sizeof name, "hardness.hardest%g.jsonl", fraction * 100.0);
      const fs::path path = out_path.empty() ? ctx.out(name) : fs::path(out_path);
      save_hardness(path, subset);
      ctx.record(path, Json{{"fraction", fraction}, {"items", subset.size()}});
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "ROUGE-2, F1 and EM with bootstrap intervals");
  std::string gold_path, pred_path;
  std::optional<std::size_t> iterations;
  eval_cmd->add_option("--gold", gold_path, "gold or pairs file")->required();
  eval_cmd->add_option("--pred", pred_path, "predictions file")->required();
  eval_cmd->add_option("--hardness", hardness_path, "hardness file for per-stratum results");
  eval_cmd->add_option("--bootstrap-iterations", iterations);
  eval_cmd->add_option("--out", out_path);
  eval_cmd->callback([&] {
    action = [&] {
      Context ctx("eval", g);
      if (iterations) ctx.cfg().set("metrics", "bootstrap_iterations", *iterations);
      ctx.validate();
      const auto gold = load_items(ctx.input(gold_path, "", "gold"));
      const auto preds = load_predictions(ctx.input(pred_path, "", "predictions"));
      std::optional<std::vector<HardnessRecord>> hardness;
      if (!hardness_path.empty()) hardness = load_hardness(ctx.input(hardness_path, "", "hardness"));
      const auto report = evaluate(gold, preds, ctx.cfg().bootstrap_config(), hardness ? &*hardness : nullptr);
      const fs::path path = out_path.empty() ? ctx.out("report.json") : fs::path(out_path);
      write_text(path, to_json(report).dump(2) + "\n");
      const fs::path table = path.parent_path() / (path.stem().string() + ".txt");
      write_text(table, to_table(report));
      ctx.record(path);
      ctx.record(table);
      std::cout << to_table(report);
    };
  });

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "combine expert annotations; Welch test and agreement");
  std::string annotations_path, compare_flag;
  stats_cmd->add_option("--annotations", annotations_path, "annotation JSON-lines")->required();
  stats_cmd->add_option("--compare", compare_flag, "two methods to compare, e.g. xaiqa,cosine");
  stats_cmd->add_option("--out", out_path);
  stats_cmd->callback([&] {
    action = [&] {
      Context ctx("stats", g);
      ctx.validate();
      std::vector<stats::AnnotationRecord> records;
      read_jsonl(ctx.input(annotations_path, "", "annotations"), [&](const Json& r, std::size_t line) {
        try {
          records.push_back(stats::annotation_from_json(r));
        } catch (const Error& e) {
          fail(e.kind(), annotations_path + ":" + std::to_string(line) + ": " + e.what());
        }
      });
      const auto combined = stats::combine_annotations(records);

      // Agreement on correctness between the two annotators of each pair,
      // ordered by annotator id.
      std::map<std::string, std::vector<const stats::AnnotationRecord*>> by_pair;
      for (const auto& r : records) by_pair[r.pair_id].push_back(&r);
      std::vector<bool> first, second;
      for (auto& [id, recs] : by_pair) {
        std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->annotator_id < b->annotator_id; });
        first.push_back(recs[0]->correct);
        second.push_back(recs[1]->correct);
      }
      Json by_method = Json::object();
      for (const auto& [m, c] : combined.by_method) {
        by_method[m] = Json{{"pairs", c.pairs}, {"semantic", c.semantic}, {"lexical", c.lexical},
                            {"abbreviation", c.abbreviation}};
      }
      Json out{{"pairs", combined.pairs.size()},
               {"by_method", by_method},
               {"raw_agreement", stats::raw_agreement(first, second)},
               {"cohen_kappa", stats::cohen_kappa(first, second)}};
      if (!compare_flag.empty()) {
        const auto comma = compare_flag.find(',');
        if (comma == std::string::npos) fail(ErrorKind::usage, "--compare expects METHOD_A,METHOD_B");
        const auto a = compare_flag.substr(0, comma);
        const auto b = compare_flag.substr(comma + 1);
        for (const auto& m : {a, b}) {
          if (!combined.by_method.count(m)) fail(ErrorKind::input, "no annotations for method " + m);
        }
        const auto& ca = combined.by_method.at(a);
        const auto& cb = combined.by_method.at(b);
        const auto sa = stats::bernoulli_sample(ca.semantic, ca.pairs);
        const auto sb = stats::bernoulli_sample(cb.semantic, cb.pairs);
        const auto w = stats::welch_t_test(sa, sb);
        out["welch_semantic"] = Json{{"a", a}, {"b", b}, {"t", w.t}, {"df", w.df}, {"p_two_sided", w.p_two_sided}};
      }
      const fs::path path = out_path.empty() ? ctx.out("stats.json") : fs::path(out_path);
      write_text(path, out.dump(2) + "\n");
      ctx.record(path);
      std::cout << out.dump(2) << "\n";
    };
  });

  // prompt-build
  auto* prompt_cmd = app.add_subcommand("prompt-build", "zero- or few-shot prompts within a budget");
  add_corpus_flags(prompt_cmd);
  std::string examples_path;
  std::optional<std::size_t> max_units, num_examples;
  prompt_cmd->add_option("--items", items_path, "gold or pairs file with the queries")->required();
  prompt_cmd->add_option("--examples", examples_path, "ranked pairs to draw few-shot examples from");
  prompt_cmd->add_option("--max-units", max_units);
  prompt_cmd->add_option("--num-examples", num_examples);
  prompt_cmd->add_option("--out", out_path, "bundle directory (default <output-dir>/prompts)");
  prompt_cmd->callback([&] {
    action = [&] {
      Context ctx("prompt-build", g);
      if (max_units) ctx.cfg().set("prompt", "max_units", *max_units);
      if (num_examples) ctx.cfg().set("prompt", "num_examples", *num_examples);
      ctx.validate();
      const auto corpus = ctx.corpus(corpus_path, vocab_path);
      const auto items = load_items(ctx.input(items_path, "", "items"));
      std::vector<QAPair> pool;
      if (!examples_path.empty()) pool = load_pairs(ctx.input(examples_path, "", "examples"));
      const auto budget = ctx.cfg().prompt_budget();
      const auto n = ctx.cfg().get<std::size_t>("prompt", "num_examples");
      const auto radius = ctx.cfg().get<std::size_t>("prompt", "window_radius");
      const auto seed = ctx.cfg().get<std::uint64_t>("prompt", "seed");
      std::vector<BuiltPrompt> prompts;
      for (const auto& item : items) {
        const Document* doc = corpus.find(item.context_doc_id);
        if (!doc) fail(ErrorKind::input, "item " + item.item_id + " references unknown document " + item.context_doc_id);
        std::vector<QAPair> candidates;
        for (const auto& p : pool) {
          if (p.doc_id != item.context_doc_id) candidates.push_back(p);
        }
        std::vector<FewShotExample> examples;
        for (const auto& p : sample_examples(candidates, n, text::fnv1a64(item.item_id, seed))) {
          const Document* src = corpus.find(p.doc_id);
          if (!src) fail(ErrorKind::input, "example references unknown document " + p.doc_id);
          examples.push_back(make_example(*src, p, radius));
        }
        prompts.push_back(assemble_prompt(examples, PromptQuery{item.item_id, item.question, doc->text()}, budget));
      }
      const fs::path dir = out_path.empty() ? ctx.out("prompts") : fs::path(out_path);
      write_prompt_bundle(dir, prompts);
      ctx.record(dir / "manifest.json", Json{{"prompts", prompts.size()}});
    };
  });

  // parse-responses
  auto* parse_cmd = app.add_subcommand("parse-responses", "turn raw model responses into predictions");
  std::string responses_path;
  std::optional<bool> recover;
  parse_cmd->add_option("--responses", responses_path, "JSON-lines {\"query_id\", \"raw\"}")->required();
  parse_cmd->add_option("--recover-missing-brace", recover);
  parse_cmd->add_option("--out", out_path);
  parse_cmd->callback([&] {
    action = [&] {
      Context ctx("parse-responses", g);
      if (recover) ctx.cfg().set("prompt", "recover_missing_brace", *recover);
      ctx.validate();
      const bool fix = ctx.cfg().get<bool>("prompt", "recover_missing_brace");
      std::vector<Json> rows;
      std::size_t failed = 0;
      read_jsonl(ctx.input(responses_path, "", "responses"), [&](const Json& r, std::size_t) {
        auto p = parse_model_answer(required<std::string>(r, "raw"), fix);
        p.item_id = required<std::string>(r, "query_id");
        failed += p.parse_failed ? 1 : 0;
        rows.push_back(to_json(p));
      });
      const fs::path path = out_path.empty() ? ctx.out("predictions.jsonl") : fs::path(out_path);
      write_jsonl(path, rows);
      ctx.record(path, Json{{"predictions", rows.size()}, {"parse_failures", failed}});
      if (failed) log(std::to_string(failed) + " response(s) could not be parsed; recorded as abstentions");
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (app.get_subcommands().empty() && !app.remaining().empty()) {
      msg = "unknown subcommand \"" + app.remaining().front() + "\"";
    }
    for (auto& c : msg) c = c == '\n' ? ' ' : c;
    std::cerr << "error[" << kind_name(ErrorKind::usage) << "]: " << msg << "\n";
    return exit_code(ErrorKind::usage);
  }

  try {
    action();
  } catch (const Error& e) {
    std::string msg = e.what();
    for (auto& c : msg) c = c == '\n' ? ' ' : c;
    std::cerr << "error[" << kind_name(e.kind()) << "]: " << msg << "\n";
    return exit_code(e.kind());
  } catch (const Json::exception& e) {
    std::cerr << "error[" << kind_name(ErrorKind::input) << "]: " << e.what() << "\n";
    return exit_code(ErrorKind::input);
  } catch (const std::exception& e) {
    std::cerr << "error[" << kind_name(ErrorKind::io) << "]: " << e.what() << "\n";
    return exit_code(ErrorKind::io);
  }
  return 0;
}
