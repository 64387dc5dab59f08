// Copyright 2026 The smab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// smab: word-sensitivity estimation for black-box text classifiers.
//
// Exit codes: 0 ok, 2 usage, 3 input error, 4 oracle failure. Errors are
// reported on stderr as {"error": <kind>, "message": <text>}.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smab/smab.hpp"

namespace {

using smab::ErrorKind;
using smab::raise;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitOracle = 4;

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    smab::write_file(path, content);
  }
}

nlohmann::json read_json(const std::string& path) {
  auto j = nlohmann::json::parse(smab::read_file(path), nullptr, false);
  if (j.is_discarded()) raise(ErrorKind::kParse, path + " is not valid JSON");
  return j;
}

smab::SensitivityReport read_report(const std::string& path) {
  return smab::sensitivity_report_from_json(read_json(path));
}

/// Shared `--config` / `--set key=value` handling; flags win over the file.
struct ConfigOptions {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "flat key = value config file (see `smab keys`)");
    cmd->add_option("--set", overrides, "override a config key, e.g. --set seed=7")
        ->expected(1)
        ->allow_extra_args(false)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  }

  smab::FlatConfig load() const {
    smab::FlatConfig cfg = smab::load_flat_config(path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) raise(ErrorKind::kConfig, "--set expects key=value, got '" + kv + "'");
      cfg.set(std::string(smab::text::trim(kv.substr(0, eq))), std::string(smab::text::trim(kv.substr(eq + 1))));
    }
    return cfg;
  }
};

std::vector<smab::Document> load_docs(const smab::FlatConfig& cfg, const std::string& path) {
  if (path.empty()) raise(ErrorKind::kConfig, "no corpus given (--corpus or the 'corpus' config key)");
  return smab::load_corpus(path, cfg.corpus_format(path));
}

std::string pick(const std::string& flag, const smab::FlatConfig& cfg, const std::string& key) {
  return flag.empty() ? cfg.str(key) : flag;
}

std::string keys_help() {
  std::ostringstream out;
  out << "Config keys (flat `key = value`, '#' comments):\n";
  for (const auto& k : smab::kConfigKeys) {
    out << "  " << k.name << " [default: " << (k.default_value.empty() ? "\"\"" : std::string(k.default_value))
        << "]\n      " << k.help << "\n";
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smab - word-level sensitivity estimation for black-box text classifiers"};
  app.footer(keys_help());
  app.require_subcommand(1);

  // index
  auto* index_cmd = app.add_subcommand("index", "build the word -> occurrence arm index from a corpus");
  std::string index_corpus, index_out;
  ConfigOptions index_cfg;
  index_cmd->add_option("--corpus", index_corpus, "corpus file (JSONL or CSV)");
  index_cmd->add_option("--out", index_out, "index JSON output (default stdout)");
  index_cfg.attach(index_cmd);

  // run
  auto* run_cmd = app.add_subcommand("run", "estimate global word sensitivities");
  std::string run_index, run_out, run_resume, run_corpus;
  ConfigOptions run_cfg;
  run_cmd->add_option("--index", run_index, "arm index JSON (default: config 'index')");
  run_cmd->add_option("--corpus", run_corpus, "corpus the index was built from (default: config 'corpus')");
  run_cmd->add_option("--out", run_out, "report output (default: config 'report', else stdout)");
  run_cmd->add_option("--resume", run_resume, "resume from a checkpoint file");
  run_cfg.attach(run_cmd);

  // sasr
  auto* sasr_cmd = app.add_subcommand("sasr", "sensitivity-aware success rate over a threshold sweep");
  std::string sasr_report, sasr_corpus, sasr_thresholds = "0.0:1.0:0.1", sasr_out;
  bool sasr_json = false;
  ConfigOptions sasr_cfg;
  sasr_cmd->add_option("--report", sasr_report, "sensitivity report")->required();
  sasr_cmd->add_option("--corpus", sasr_corpus, "test corpus (default: config 'corpus')");
  sasr_cmd->add_option("--thresholds", sasr_thresholds, "start:stop:step, or a single threshold");
  sasr_cmd->add_option("--out", sasr_out, "output file (default stdout)");
  sasr_cmd->add_flag("--json", sasr_json, "emit JSON instead of CSV");
  sasr_cfg.attach(sasr_cmd);

  // kld
  auto* kld_cmd = app.add_subcommand("kld", "KL divergence between two binned sensitivity distributions");
  std::string kld_p, kld_q;
  std::size_t kld_bins = 10;
  double kld_smoothing = 1e-9;
  kld_cmd->add_option("--report-p", kld_p, "report for P")->required();
  kld_cmd->add_option("--report-q", kld_q, "report for Q")->required();
  kld_cmd->add_option("--bins", kld_bins, "number of uniform bins over [0,1]");
  kld_cmd->add_option("--smoothing", kld_smoothing, "additive smoothing per bin");

  // proxy-study
  auto* proxy_cmd = app.add_subcommand("proxy-study", "correlate KLD-to-best-model with accuracy");
  std::vector<std::string> proxy_reports;
  std::string proxy_acc;
  std::size_t proxy_bins = 10;
  proxy_cmd->add_option("--reports", proxy_reports, "one report per model")->required();
  proxy_cmd->add_option("--accuracies", proxy_acc, "JSON array of accuracies in report order")->required();
  proxy_cmd->add_option("--bins", proxy_bins, "number of uniform bins over [0,1]");

  // attack-prompt
  auto* prompt_cmd = app.add_subcommand("attack-prompt", "render perturbation instructions for each document");
  std::string prompt_report, prompt_corpus, prompt_template = "W4", prompt_out;
  std::size_t prompt_k = 2;
  ConfigOptions prompt_cfg;
  prompt_cmd->add_option("--report", prompt_report, "sensitivity report")->required();
  prompt_cmd->add_option("--corpus", prompt_corpus, "documents to attack (default: config 'corpus')");
  prompt_cmd->add_option("--template", prompt_template, "W1 .. W6");
  prompt_cmd->add_option("--k", prompt_k, "number of sensitive words to look up");
  prompt_cmd->add_option("--out", prompt_out, "JSONL output (default stdout)");
  prompt_cfg.attach(prompt_cmd);

  // attack-eval
  auto* eval_cmd = app.add_subcommand("attack-eval", "ASR, after-attack accuracy and word modification ratio");
  std::string eval_records;
  eval_cmd->add_option("--records", eval_records, "JSONL of {x, x_adv, y, f_x, f_adv}")->required();

  // text-sens
  auto* sens_cmd = app.add_subcommand("text-sens", "keyphrase-based sensitivity of one text");
  std::string sens_text, sens_keyphrases, sens_adv;
  double sens_alpha = 0.25;
  ConfigOptions sens_cfg;
  sens_cmd->add_option("--text", sens_text, "input text")->required();
  sens_cmd->add_option("--keyphrases", sens_keyphrases,
                       "JSON keyphrase list, or 'endpoint' to ask the perturber's /v1/keyphrases")
      ->required();
  sens_cmd->add_option("--adv", sens_adv, "optional adversarial text; adds the sensitivity reward");
  sens_cmd->add_option("--alpha", sens_alpha, "sensitivity reward scale in (0,1)");
  sens_cfg.attach(sens_cmd);

  // mock-serve
  auto* mock_cmd = app.add_subcommand("mock-serve", "serve a synthetic oracle over the wire protocol");
  std::string mock_spec, mock_host = "127.0.0.1";
  int mock_port = 8080;
  mock_cmd->add_option("--spec", mock_spec, "synthetic spec JSON")->required();
  mock_cmd->add_option("--port", mock_port, "port to listen on (0 picks a free one)");
  mock_cmd->add_option("--host", mock_host, "address to bind");

  // keys
  auto* keys_cmd = app.add_subcommand("keys", "list every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*keys_cmd) {
      std::cout << keys_help();
    } else if (*index_cmd) {
      const auto cfg = index_cfg.load();
      const auto docs = load_docs(cfg, pick(index_corpus, cfg, "corpus"));
      const auto index = smab::build_arm_index(docs, cfg.preprocess_config());
      emit(pick(index_out, cfg, "index"), smab::to_json(index).dump() + "\n");
    } else if (*run_cmd) {
      const auto cfg = run_cfg.load();
      const auto pre = cfg.preprocess_config();
      const auto rc = cfg.run_config();
      const auto docs = load_docs(cfg, pick(run_corpus, cfg, "corpus"));
      const std::string index_path = pick(run_index, cfg, "index");
      if (index_path.empty()) raise(ErrorKind::kConfig, "no index given (--index or the 'index' config key)");
      const auto index = smab::arm_index_from_json(read_json(index_path));
      smab::OracleSet oracles(cfg.str("classifier"), cfg.str("perturber"), cfg.remote_options(), cfg.str("cache_dir"));
      smab::Engine engine(index, docs, pre, rc, oracles.classifier(), oracles.perturber());
      if (!run_resume.empty()) engine.load_checkpoint(run_resume);
      engine.run();
      if (!cfg.str("full_regret").empty()) {
        std::ostringstream csv;
        csv << "update,regret\n";
        const auto& trace = engine.regret().cumulative;
        for (std::size_t i = 0; i < trace.size(); ++i) csv << (i + 1) << ',' << smab::text::format_double(trace[i]) << '\n';
        smab::write_file(cfg.str("full_regret"), csv.str());
      }
      emit(pick(run_out, cfg, "report"), smab::to_json(engine.report()).dump(2) + "\n");
    } else if (*sasr_cmd) {
      const auto cfg = sasr_cfg.load();
      const auto pre = cfg.preprocess_config();
      const auto report = read_report(sasr_report);
      const auto docs = load_docs(cfg, pick(sasr_corpus, cfg, "corpus"));
      std::vector<double> grid;
      if (sasr_thresholds.find(':') == std::string::npos) {
        grid.push_back(std::stod(sasr_thresholds));
      } else {
        double a = 0, b = 0, s = 0;
        if (std::sscanf(sasr_thresholds.c_str(), "%lf:%lf:%lf", &a, &b, &s) != 3) {
          raise(ErrorKind::kConfig, "--thresholds expects start:stop:step");
        }
        grid = smab::threshold_grid(a, b, s);
      }
      smab::OracleSet oracles(cfg.str("classifier"), cfg.str("perturber"), cfg.remote_options(), cfg.str("cache_dir"));
      std::vector<smab::SasrResult> rows;
      for (double t : grid) {
        rows.push_back(smab::sasr(report, t, docs, pre, oracles.perturber(), oracles.classifier(), cfg.uint("n_repl")));
      }
      if (sasr_json) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : rows) {
          out.push_back({{"threshold", r.threshold},
                         {"sasr", r.sasr ? nlohmann::json(*r.sasr) : nlohmann::json()},
                         {"eligible_count", r.eligible},
                         {"flipped_words", r.flipped_words}});
        }
        emit(sasr_out, out.dump(2) + "\n");
      } else {
        emit(sasr_out, smab::sasr_csv(rows));
      }
    } else if (*kld_cmd) {
      const auto p = smab::bin_distribution(read_report(kld_p), kld_bins);
      const auto q = smab::bin_distribution(read_report(kld_q), kld_bins);
      std::cout << smab::text::format_double(smab::kl_divergence(p, q, kld_smoothing)) << "\n";
    } else if (*proxy_cmd) {
      const auto accuracies = read_json(proxy_acc).get<std::vector<double>>();
      if (accuracies.size() != proxy_reports.size()) {
        raise(ErrorKind::kConfig, "need one accuracy per report");
      }
      std::vector<smab::SensitivityHistogram> hists;
      for (const auto& path : proxy_reports) hists.push_back(smab::bin_distribution(read_report(path), proxy_bins));
      const auto best = static_cast<std::size_t>(
          std::max_element(accuracies.begin(), accuracies.end()) - accuracies.begin());
      std::vector<double> klds;
      for (const auto& h : hists) klds.push_back(smab::kl_divergence(h, hists[best]));
      const auto res = smab::pearson(klds, accuracies);
      std::cout << nlohmann::json{{"base_report", proxy_reports[best]},
                                  {"kld", klds},
                                  {"accuracy", accuracies},
                                  {"r", res.r},
                                  {"p_value", res.p_value}}
                       .dump(2)
                << "\n";
    } else if (*prompt_cmd) {
      const auto cfg = prompt_cfg.load();
      const auto pre = cfg.preprocess_config();
      const auto report = read_report(prompt_report);
      const auto docs = load_docs(cfg, pick(prompt_corpus, cfg, "corpus"));
      const auto& tpl = smab::find_template(prompt_template);
      std::string out;
      for (const auto& d : docs) {
        std::vector<smab::ScoredWord> words;
        if (tpl.words_needed > 0) {
          try {
            words = smab::top_sensitive_words(report, d.text, prompt_k, pre);
          } catch (const smab::Error& e) {
            if (e.kind() != ErrorKind::kNoIndexedWords) throw;
            continue;
          }
        }
        out += nlohmann::json{{"doc_id", d.id},
                              {"template_id", std::string(tpl.id)},
                              {"prompt", smab::render_instruction(tpl.id, words)}}
                   .dump() +
               "\n";
      }
      emit(prompt_out, out);
    } else if (*eval_cmd) {
      const auto records = smab::parse_attack_records(smab::read_file(eval_records));
      nlohmann::json out;
      try {
        out["asr"] = smab::asr(records);
      } catch (const smab::Error& e) {
        if (e.kind() != ErrorKind::kNoCorrectOriginals) throw;
        out["asr"] = nullptr;
      }
      out["after_attack_accuracy"] = smab::after_attack_accuracy(records);
      double wmr = 0.0;
      nlohmann::json per_record = nlohmann::json::array();
      for (const auto& r : records) {
        const double w = smab::word_modification_ratio(r.x, r.x_adv);
        const auto o = smab::attack_outcome(r);
        wmr += w;
        per_record.push_back({{"correct_original", o.correct_original}, {"success", o.success}, {"wmr", w}});
      }
      out["mean_wmr"] = wmr / static_cast<double>(records.size());
      out["records"] = std::move(per_record);
      std::cout << out.dump(2) << "\n";
    } else if (*sens_cmd) {
      const auto cfg = sens_cfg.load();
      smab::OracleSet oracles(cfg.str("classifier"), cfg.str("perturber"), cfg.remote_options(), cfg.str("cache_dir"));
      auto keyphrases_for = [&](const std::string& text) {
        if (sens_keyphrases != "endpoint") return smab::keyphrases_from_json(read_json(sens_keyphrases));
        const std::string desc = cfg.str("perturber").empty() ? cfg.str("classifier") : cfg.str("perturber");
        if (auto* remote = oracles.remote(desc)) return smab::keyphrases_from_json(remote->keyphrases(text));
        if (const auto* spec = oracles.synthetic(desc)) {
          auto it = spec->keyphrases.find(text);
          return smab::KeyphraseSet{it == spec->keyphrases.end() ? std::vector<std::vector<std::string>>{} : it->second};
        }
        raise(ErrorKind::kConfig, "perturber endpoint cannot serve keyphrases");
      };
      const std::size_t n_repl = cfg.uint("n_repl");
      const double s = smab::text_sensitivity(sens_text, keyphrases_for(sens_text), oracles.perturber(),
                                              oracles.classifier(), n_repl);
      nlohmann::json out{{"text", sens_text}, {"s", s}};
      if (!sens_adv.empty()) {
        const double s_adv = smab::text_sensitivity(sens_adv, keyphrases_for(sens_adv), oracles.perturber(),
                                                    oracles.classifier(), n_repl);
        out["s_adv"] = s_adv;
        out["sensitivity_reward"] = smab::sensitivity_reward(s, s_adv, sens_alpha);
      }
      std::cout << out.dump(2) << "\n";
    } else if (*mock_cmd) {
      smab::MockServer server(smab::load_synthetic_spec(mock_spec));
      server.serve(mock_host, mock_port, [&](int port) {
        std::cout << "listening on http://" << mock_host << ":" << port << std::endl;
      });
    }
  } catch (const smab::Error& e) {
    std::cerr << nlohmann::json{{"error", std::string(smab::to_string(e.kind()))}, {"message", e.what()}}.dump() << "\n";
    return smab::is_oracle_error(e.kind()) ? kExitOracle : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "InputError"}, {"message", e.what()}}.dump() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
