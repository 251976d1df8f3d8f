// SPDX-License-Identifier: Apache-2.0
#include "cci/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/detector.hpp"
#include "cci/enhance.hpp"
#include "cci/evalkit.hpp"
#include "cci/fixer.hpp"
#include "cci/pipeline.hpp"
#include "cci/semfilter.hpp"
#include "cci/synfilter.hpp"

namespace cci {

namespace {

using nlohmann::ordered_json;

class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

void write_json_file(const ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write: " + path);
  out << j.dump(2) << '\n';
}

void write_text_file(const std::string& text, const std::string& path) {
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write: " + path);
  out << text;
}

struct Ctx {
  std::string config_path;
  std::string transcript;
  PipelineConfig cfg;
  bool loaded = false;

  PipelineConfig& config() {
    if (!loaded) {
      cfg = config_path.empty() ? default_pipeline_config()
                                : load_pipeline_config(config_path);
      loaded = true;
    }
    return cfg;
  }

  Gateway gateway() {
    GatewayOptions opts;
    opts.transcript_path =
        transcript.empty() ? config().transcript_path : transcript;
    return Gateway(opts);
  }

  void manifest(const std::string& command,
                const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs) {
    if (outputs.empty()) return;
    write_manifest(outputs.front() + ".manifest.json", command, inputs,
                   outputs, config().config_hash, config().seed);
  }
};

LlmEndpoint endpoint_from_url(const std::string& url, const std::string& name) {
  LlmEndpoint e;
  e.name = name;
  e.base_url = url;
  e.model_id = "default";
  return e;
}

Corpus split_of(const Corpus& corpus, Split split) {
  Corpus out;
  for (const CciCase& c : corpus.cases)
    if (c.split && *c.split == split) out.cases.push_back(c);
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"code-comment inconsistency corpus, detector and fixer toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto ctx = std::make_shared<Ctx>();
  app.add_option("--config", ctx->config_path,
                 "pipeline config file (key = value with [sections])");
  app.add_option("--transcript", ctx->transcript,
                 "JSON Lines transcript of every backend attempt");

  int exit_code = 0;

  // ---------------------------------------------------------------- dedup --
  {
    auto* sub = app.add_subcommand("dedup", "remove duplicate cases");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    auto split_report = std::make_shared<std::string>();
    auto permissive = std::make_shared<bool>(false);
    sub->add_option("--in", *in, "input corpus (JSON Lines)")->required();
    sub->add_option("--out", *out, "deduplicated corpus")->required();
    sub->add_option("--report", *report, "dedup report JSON");
    sub->add_option("--split-report", *split_report,
                    "also check split hygiene (requires split fields)");
    sub->add_flag("--permissive", *permissive,
                  "skip malformed lines instead of aborting");
    sub->callback([=]() {
      std::vector<std::string> skipped;
      const Corpus corpus = load_corpus(*in, *permissive, &skipped);
      for (const std::string& s : skipped)
        std::cerr << "skipped " << s << '\n';
      auto [deduped, rep] = deduplicate(corpus);
      save_corpus(deduped, *out);
      std::vector<std::string> outputs{*out};
      if (!report->empty()) {
        write_json_file(rep.to_json(), *report);
        outputs.push_back(*report);
      }
      if (!split_report->empty()) {
        const SplitHygieneReport hygiene = check_split_hygiene(deduped);
        write_json_file(hygiene.to_json(), *split_report);
        outputs.push_back(*split_report);
        if (!hygiene.clean())
          std::cerr << "warning: " << hygiene.violations.size()
                    << " cross-split duplicate quadruple(s)\n";
      }
      ctx->manifest("dedup", {*in}, outputs);
      std::cout << "dedup: " << corpus.size() << " -> " << deduped.size()
                << " cases (" << rep.removed_ids.size() << " removed)\n";
    });
  }

  // ----------------------------------------------------- filter-syntactic --
  {
    auto* sub = app.add_subcommand("filter-syntactic",
                                   "drop trivial comment-change positives");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    sub->add_option("--in", *in)->required();
    sub->add_option("--out", *out)->required();
    sub->add_option("--report", *report, "filter report JSON");
    sub->callback([=]() {
      const Corpus corpus = load_corpus(*in);
      auto [filtered, rep] = apply_syntactic_filters(corpus);
      save_corpus(filtered, *out);
      std::vector<std::string> outputs{*out};
      if (!report->empty()) {
        write_json_file(rep.to_json(), *report);
        outputs.push_back(*report);
      }
      ctx->manifest("filter-syntactic", {*in}, outputs);
      std::cout << "filter-syntactic: removed " << rep.total_removed()
                << " (typo " << rep.typo_fix << ", case " << rep.case_change
                << ", stopword " << rep.stopword_change << ", lexical "
                << rep.lexical_change << ")\n";
    });
  }

  // ------------------------------------------------------ filter-semantic --
  {
    auto* sub = app.add_subcommand("filter-semantic",
                                   "three-voter majority filtering");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto votes = std::make_shared<std::string>();
    auto shots = std::make_shared<std::string>();
    auto voter_urls = std::make_shared<std::vector<std::string>>();
    auto record = std::make_shared<std::string>();
    auto in_flight = std::make_shared<int>(4);
    sub->add_option("--in", *in)->required();
    sub->add_option("--out", *out)->required();
    sub->add_option("--votes", *votes, "vote records JSON Lines")->required();
    sub->add_option("--shots", *shots, "4-shot examples JSON");
    sub->add_option("--voters", *voter_urls,
                    "three voter endpoint URLs (overrides config)")
        ->expected(0, 3);
    sub->add_option("--record", *record,
                    "record fresh completions into this replay store");
    sub->add_option("--max-in-flight", *in_flight);
    sub->callback([=]() {
      const Corpus corpus = load_corpus(*in);
      PipelineConfig& cfg = ctx->config();

      std::array<LlmEndpoint, 3> voters;
      if (voter_urls->size() == 3) {
        for (int i = 0; i < 3; ++i)
          voters[i] = endpoint_from_url((*voter_urls)[i],
                                        "voter." + std::to_string(i + 1));
      } else if (cfg.voters.size() == 3) {
        for (int i = 0; i < 3; ++i) voters[i] = cfg.voters[i];
      } else {
        throw DataError(
            "three voters required: pass --voters or configure [voter.1..3]");
      }

      const std::string shots_path =
          shots->empty() ? cfg.shots_path : *shots;
      if (shots_path.empty())
        throw DataError("shots file required (--shots or [run] shots)");
      const ShotSet shot_set = load_shots(shots_path);

      Gateway gateway = ctx->gateway();
      if (!record->empty())
        for (const LlmEndpoint& v : voters)
          gateway.register_backend(
              v.name, std::make_shared<ReplayBackend>(
                          *record, make_backend_from_url(v.base_url)));

      SemanticFilterOptions opts;
      opts.max_in_flight = *in_flight;
      auto [filtered, records] =
          semantic_filter(corpus, gateway, voters, shot_set, opts);
      save_corpus(filtered, *out);
      save_vote_records(records, *votes);
      ctx->manifest("filter-semantic", {*in, shots_path}, {*out, *votes});
      std::size_t kept = 0;
      for (const VoteRecord& r : records)
        if (r.keep) ++kept;
      std::cout << "filter-semantic: " << records.size() << " queried, "
                << kept << " kept\n";
    });
  }

  // ------------------------------------------------------ select-validated --
  {
    auto* sub = app.add_subcommand(
        "select-validated", "sample unanimous test positives for review");
    auto votes = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto n = std::make_shared<std::size_t>(300);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto seed_opt = sub->add_option("--seed", *seed);
    sub->add_option("--votes", *votes)->required();
    sub->add_option("--in", *in)->required();
    sub->add_option("--out", *out)->required();
    sub->add_option("--n", *n, "target candidate count (default 300)");
    sub->callback([=]() {
      const Corpus corpus = load_corpus(*in);
      const auto records = load_vote_records(*votes);
      const std::uint64_t use_seed =
          seed_opt->count() ? *seed : ctx->config().seed;
      std::string warning;
      const Corpus selected =
          select_validated_candidates(records, corpus, *n, use_seed, &warning);
      if (!warning.empty()) std::cerr << "warning: " << warning << '\n';
      save_corpus(selected, *out);
      ctx->manifest("select-validated", {*in, *votes}, {*out});
      std::cout << "select-validated: " << selected.size() << " candidates\n";
    });
  }

  // ---------------------------------------------------------------- train --
  {
    auto* sub = app.add_subcommand("train", "train the detector");
    auto in = std::make_shared<std::string>();
    auto model_out = std::make_shared<std::string>();
    auto history_out = std::make_shared<std::string>();
    auto epochs = std::make_shared<std::size_t>(0);
    auto lambda = std::make_shared<double>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    sub->add_option("--in", *in, "labeled corpus; split fields honored")
        ->required();
    sub->add_option("--model-out", *model_out)->required();
    sub->add_option("--history", *history_out, "per-epoch history JSON");
    auto epochs_opt = sub->add_option("--epochs", *epochs);
    auto lambda_opt = sub->add_option("--lambda", *lambda);
    auto seed_opt = sub->add_option("--seed", *seed);
    sub->callback([=]() {
      const Corpus corpus = load_corpus(*in);
      PipelineConfig& cfg = ctx->config();
      DetectorConfig dc = cfg.detector;
      if (epochs_opt->count()) dc.epochs = *epochs;
      if (lambda_opt->count()) dc.lambda = *lambda;
      if (seed_opt->count()) dc.seed = *seed;

      Corpus train_split = split_of(corpus, Split::Train);
      Corpus valid_split = split_of(corpus, Split::Valid);
      const Corpus& train_corpus =
          train_split.cases.empty() ? corpus : train_split;

      DetectorModel model = init_detector(dc, train_corpus);
      const TrainHistory history =
          train(model, train_corpus,
                valid_split.cases.empty() ? nullptr : &valid_split);
      save_model(model, *model_out);
      std::vector<std::string> outputs{*model_out};
      if (!history_out->empty()) {
        write_json_file(history.to_json(), *history_out);
        outputs.push_back(*history_out);
      }
      ctx->manifest("train", {*in}, outputs);
      std::cout << "train: " << train_corpus.size() << " cases, "
                << dc.epochs << " epochs\n";
    });
  }

  // --------------------------------------------------------------- detect --
  {
    auto* sub = app.add_subcommand("detect", "run the detector over a corpus");
    auto model_path = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--model", *model_path)->required();
    sub->add_option("--in", *in)->required();
    sub->add_option("--out", *out, "predictions JSON Lines")->required();
    sub->callback([=]() {
      const DetectorModel model = load_model(*model_path);
      const Corpus corpus = load_corpus(*in);
      std::ofstream os(*out);
      if (!os.is_open()) throw DataError("cannot write: " + *out);
      std::size_t flagged = 0;
      for (const CciCase& c : corpus.cases) {
        const Prediction p = predict(model, c);
        ordered_json row;
        row["case_id"] = p.case_id;
        row["probability"] = p.probability;
        row["verdict"] = p.inconsistent ? "inconsistent" : "consistent";
        os << row.dump() << '\n';
        if (p.inconsistent) ++flagged;
      }
      os.close();
      ctx->manifest("detect", {*model_path, *in}, {*out});
      std::cout << "detect: " << flagged << "/" << corpus.size()
                << " flagged\n";
    });
  }

  // -------------------------------------------------------------- enhance --
  {
    auto* sub =
        app.add_subcommand("enhance", "iterative training-data enhancement");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto history_out = std::make_shared<std::string>();
    auto model_out = std::make_shared<std::string>();
    auto teacher_url = std::make_shared<std::string>();
    auto iterations = std::make_shared<std::size_t>(0);
    auto rate = std::make_shared<double>(0);
    auto dedup_after = std::make_shared<bool>(false);
    sub->add_option("--in", *in, "original labeled dataset D0")->required();
    sub->add_option("--out", *out, "enhanced corpus")->required();
    sub->add_option("--history", *history_out);
    sub->add_option("--model-out", *model_out, "final trained detector");
    sub->add_option("--teacher", *teacher_url, "teacher endpoint URL");
    auto iter_opt = sub->add_option("--iterations", *iterations);
    auto rate_opt = sub->add_option("--rate", *rate);
    sub->add_flag("--dedup-after", *dedup_after,
                  "post-loop dedup pass over the enhanced corpus");
    sub->callback([=]() {
      const Corpus d0 = load_corpus(*in);
      PipelineConfig& cfg = ctx->config();
      EnhanceConfig ec = cfg.enhance;
      if (iter_opt->count()) ec.max_iterations = *iterations;
      if (rate_opt->count()) ec.sampling_rate = *rate;
      LlmEndpoint teacher = teacher_url->empty()
                                ? cfg.teacher
                                : endpoint_from_url(*teacher_url, "teacher");
      if (teacher.base_url.empty())
        throw DataError("teacher endpoint required (--teacher or [teacher])");

      Gateway gateway = ctx->gateway();
      EnhanceResult result =
          iterative_enhance(cfg.detector, d0, gateway, teacher, ec);
      Corpus enhanced = std::move(result.dataset);
      if (*dedup_after) enhanced = deduplicate(enhanced).first;
      save_corpus(enhanced, *out);
      std::vector<std::string> outputs{*out};
      if (!history_out->empty()) {
        write_json_file(result.history_json(), *history_out);
        outputs.push_back(*history_out);
      }
      if (!model_out->empty()) {
        save_model(result.final_model, *model_out);
        outputs.push_back(*model_out);
      }
      ctx->manifest("enhance", {*in}, outputs);
      std::cout << "enhance: " << d0.size() << " -> " << enhanced.size()
                << " cases over " << result.history.size() << " iterations\n";
    });
  }

  // ------------------------------------------------------------------ fix --
  {
    auto* sub = app.add_subcommand("fix", "repair comments via the backend");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto backend_url = std::make_shared<std::string>();
    auto max_tokens = std::make_shared<int>(256);
    sub->add_option("--in", *in, "cases to fix")->required();
    sub->add_option("--out", *out, "fix results JSON Lines")->required();
    sub->add_option("--backend", *backend_url, "fixer endpoint URL");
    sub->add_option("--max-tokens", *max_tokens);
    sub->callback([=]() {
      const Corpus corpus = load_corpus(*in);
      PipelineConfig& cfg = ctx->config();
      LlmEndpoint backend = backend_url->empty()
                                ? cfg.fixer
                                : endpoint_from_url(*backend_url, "fixer");
      if (backend.base_url.empty())
        throw DataError("fixer endpoint required (--backend or [fixer])");
      Gateway gateway = ctx->gateway();
      std::ofstream os(*out);
      if (!os.is_open()) throw DataError("cannot write: " + *out);
      std::size_t failures = 0;
      for (const CciCase& c : corpus.cases) {
        const FixResult r = fix_comment(gateway, backend, c, *max_tokens);
        if (!r.ok()) ++failures;
        os << r.to_json().dump() << '\n';
      }
      os.close();
      ctx->manifest("fix", {*in}, {*out});
      std::cout << "fix: " << corpus.size() - failures << "/" << corpus.size()
                << " repaired\n";
      if (!corpus.cases.empty() && failures == corpus.size())
        throw BackendError("every fix request failed");
    });
  }

  // ---------------------------------------------------------------- solve --
  {
    auto* sub = app.add_subcommand(
        "solve", "detect everything, fix what is flagged, time it");
    auto model_path = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto timing = std::make_shared<std::string>();
    auto backend_url = std::make_shared<std::string>();
    auto monolithic = std::make_shared<bool>(false);
    auto max_tokens = std::make_shared<int>(256);
    sub->add_option("--model", *model_path)->required();
    sub->add_option("--in", *in)->required();
    sub->add_option("--out", *out, "per-case results JSON Lines")->required();
    sub->add_option("--timing", *timing, "timing report JSON");
    sub->add_option("--backend", *backend_url, "fixer endpoint URL");
    sub->add_flag("--monolithic", *monolithic,
                  "send every case to the fixer (baseline comparison)");
    sub->add_option("--fix-max-tokens", *max_tokens);
    sub->callback([=]() {
      auto model = std::make_shared<DetectorModel>(load_model(*model_path));
      const Corpus corpus = load_corpus(*in);
      PipelineConfig& cfg = ctx->config();
      LlmEndpoint backend = backend_url->empty()
                                ? cfg.fixer
                                : endpoint_from_url(*backend_url, "fixer");
      if (backend.base_url.empty())
        throw DataError("fixer endpoint required (--backend or [fixer])");
      Gateway gateway = ctx->gateway();
      SolveOptions opts;
      opts.monolithic = *monolithic;
      opts.fix_max_tokens = *max_tokens;
      auto [results, report] =
          solve(corpus, detector_fn(model), gateway, backend, opts);
      std::ofstream os(*out);
      if (!os.is_open()) throw DataError("cannot write: " + *out);
      for (const SolveCaseResult& r : results) os << r.to_json().dump() << '\n';
      os.close();
      std::vector<std::string> outputs{*out};
      if (!timing->empty()) {
        write_json_file(report.to_json(), *timing);
        outputs.push_back(*timing);
      }
      ctx->manifest("solve", {*model_path, *in}, outputs);
      std::cout << "solve: n=" << report.n << " flagged=" << report.flagged
                << " fixer_calls=" << report.fixer_calls
                << " mean_case_s=" << report.mean_case_s << '\n';
      if (report.fixer_calls > 0 &&
          report.fixer_errors == report.fixer_calls)
        throw BackendError("every fixer call failed");
    });
  }

  // ------------------------------------------------------------ eval-detect --
  {
    auto* sub = app.add_subcommand("eval-detect",
                                   "classification metrics for the detector");
    auto model_path = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--model", *model_path)->required();
    sub->add_option("--in", *in, "labeled corpus")->required();
    sub->add_option("--out", *out, "metrics report JSON");
    sub->callback([=]() {
      const DetectorModel model = load_model(*model_path);
      const Corpus corpus = load_corpus(*in);
      const DetectorEval eval = evaluate(model, corpus);
      ordered_json j;
      j["schema_version"] = 1;
      j["accuracy"] = eval.accuracy;
      j["precision"] = eval.precision;
      j["recall"] = eval.recall;
      j["f1"] = eval.f1;
      j["confusion"] = {{"tp", eval.tp}, {"fp", eval.fp},
                        {"fn", eval.fn}, {"tn", eval.tn}};
      j["misclassified_ids"] = eval.misclassified_ids;
      if (!out->empty()) {
        write_json_file(j, *out);
        ctx->manifest("eval-detect", {*model_path, *in}, {*out});
      }
      std::cout << j.dump(2) << '\n';
    });
  }

  // -------------------------------------------------------------- eval-fix --
  {
    auto* sub =
        app.add_subcommand("eval-fix", "text metrics for repaired comments");
    auto in = std::make_shared<std::string>();
    auto fixes = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto csv = std::make_shared<std::string>();
    sub->add_option("--in", *in, "corpus with reference new_comment")
        ->required();
    sub->add_option("--fixes", *fixes, "fix results JSON Lines")->required();
    sub->add_option("--out", *out, "metrics report JSON");
    sub->add_option("--csv", *csv, "per-case CSV export");
    sub->callback([=]() {
      const Corpus corpus = load_corpus(*in);
      std::ifstream fin(*fixes);
      if (!fin.is_open()) throw DataError("cannot open fixes: " + *fixes);
      std::vector<ScoredPair> pairs;
      std::string line;
      while (std::getline(fin, line)) {
        if (line.empty()) continue;
        const auto j = ordered_json::parse(line);
        if (!j.contains("predicted_comment")) continue;  // error slot
        const std::string id = j.at("case_id").get<std::string>();
        const CciCase* c = corpus.find(id);
        if (!c) throw DataError("fix result for unknown case: " + id);
        if (!c->new_comment)
          throw DataError("case lacks reference new_comment: " + id);
        ScoredPair p;
        p.case_id = id;
        p.source = metric_tokens(c->old_comment);
        p.candidate =
            metric_tokens(j.at("predicted_comment").get<std::string>());
        p.reference = metric_tokens(*c->new_comment);
        pairs.push_back(std::move(p));
      }
      const TextMetricsReport report = score_pairs(pairs);
      ordered_json j = report.to_json();
      if (!out->empty()) {
        write_json_file(j, *out);
        std::vector<std::string> outputs{*out};
        if (!csv->empty()) {
          write_text_file(report.to_csv(), *csv);
          outputs.push_back(*csv);
        }
        ctx->manifest("eval-fix", {*in, *fixes}, outputs);
      } else if (!csv->empty()) {
        write_text_file(report.to_csv(), *csv);
      }
      std::cout << "bleu4=" << format_score(report.bleu4 / 100.0)
                << " meteor=" << format_score(report.meteor / 100.0)
                << " sari=" << format_score(report.sari / 100.0)
                << " gleu=" << format_score(report.gleu / 100.0) << '\n';
    });
  }

  // --------------------------------------------------------------- metric --
  {
    auto* sub = app.add_subcommand("metric", "score one candidate directly");
    auto name = std::make_shared<std::string>();
    auto src = std::make_shared<std::string>();
    auto cand = std::make_shared<std::string>();
    auto ref = std::make_shared<std::string>();
    sub->add_option("name", *name, "bleu4 | meteor | sari | gleu")->required();
    sub->add_option("--src", *src, "source text (sari/gleu)");
    sub->add_option("--cand", *cand, "candidate text")->required();
    sub->add_option("--ref", *ref, "reference text")->required();
    sub->callback([=]() {
      const Words s = metric_tokens(*src);
      const Words c = metric_tokens(*cand);
      const Words r = metric_tokens(*ref);
      double score = 0.0;
      if (*name == "bleu4") score = bleu4(c, r);
      else if (*name == "meteor") score = meteor(c, r);
      else if (*name == "sari") score = sari(s, c, r);
      else if (*name == "gleu") score = gleu(s, c, r);
      else throw CLI::ValidationError("metric", "unknown metric: " + *name);
      ordered_json j;
      j["metric"] = *name;
      j["score"] = score;
      std::cout << j.dump() << '\n';
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return exit_code;
}

}  // namespace cci
