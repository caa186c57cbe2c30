// ddi: command-line front end for corpus generation, encoding, training,
// prediction, ensembling and scoring.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "ddi/config.hpp"
#include "ddi/corpus.hpp"
#include "ddi/ensemble.hpp"
#include "ddi/error.hpp"
#include "ddi/generator.hpp"
#include "ddi/infer.hpp"
#include "ddi/manifest.hpp"
#include "ddi/model.hpp"
#include "ddi/roundtrip.hpp"
#include "ddi/score.hpp"
#include "ddi/tagging.hpp"
#include "ddi/train.hpp"

using namespace ddi;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string codes_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Config file (version = ddi-config/1)")->check(CLI::ExistingFile);
  sub->add_option("--set", c.overrides, "Override one config key, KEY=VALUE (repeatable)");
  sub->add_option("--codes", c.codes_path, "PK code vocabulary file (default: built-in placeholder)")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Random seed (overrides train.seed)");
}

struct Run {
  cli::RunConfig config;
  CodeVocabulary codes = CodeVocabulary::placeholder();
  cli::RunManifest manifest;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Run(const std::string& command, const Common& c, int argc, char** argv) {
    manifest.command = command;
    for (int i = 1; i < argc; ++i) manifest.arguments.emplace_back(argv[i]);
    if (!c.config_path.empty()) {
      config = cli::load_config(c.config_path);
      manifest.add_input(c.config_path);
    }
    for (const auto& o : c.overrides) cli::apply_override(config, o);
    if (c.seed) config.train.seed = *c.seed;
    config.finalize();
    if (!c.codes_path.empty()) {
      codes = CodeVocabulary::load(c.codes_path);
      manifest.add_input(c.codes_path);
    }
    config.model.pk_classes = codes.size();
    manifest.seed = config.train.seed;
    manifest.config = cli::serialize_config(config);
  }

  CorpusFile read(const std::string& path) {
    manifest.add_input(path);
    return corpus::read_corpus_file(path, codes);
  }

  void write(const std::string& path, std::string_view content) {
    cli::write_atomic(path, content);
    manifest.add_output(path);
  }

  void finish(const std::string& manifest_for) {
    manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    cli::write_atomic(cli::manifest_path(manifest_for), manifest.to_json());
  }
};

std::string tag_lines(const tagging::TagSequence& seq) {
  std::string out = "# " + seq.sentence_id + "\n";
  for (std::size_t i = 0; i < seq.tokens.size(); ++i)
    out += seq.tokens[i].text + "\t" + std::string(tagging::to_string(seq.tags[i])) + "\n";
  return out + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drug-drug interaction extraction from drug labels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cli::kToolVersion));

  // generate
  Common gen_common;
  std::string gen_out;
  std::size_t gen_labels = 22, gen_sentences = 27;
  double gen_overlap = 0.0, gen_coordination = 0.0;
  bool gen_coarse = false;
  auto* gen = app.add_subcommand("generate", "Write a synthetic annotated corpus");
  gen->add_option("output", gen_out, "Output corpus file")->required();
  add_common(gen, gen_common);
  gen->add_option("--labels", gen_labels, "Number of drug labels")->capture_default_str();
  gen->add_option("--sentences-per-label", gen_sentences, "Sentences per label")->capture_default_str();
  gen->add_option("--overlap-rate", gen_overlap, "Share of clauses with nested precipitants")->capture_default_str();
  gen->add_option("--coordination-rate", gen_coordination, "Share of clauses with coordinated precipitants")
      ->capture_default_str();
  gen->add_flag("--coarse-pk", gen_coarse, "Emit COARSE_* PK outcomes and keep the true codes in metadata");

  // map-nlm180
  Common map_common;
  std::string map_in, map_out;
  auto* map = app.add_subcommand("map-nlm180", "Map a coarse NLM-180-style file onto the corpus format");
  map->add_option("input", map_in, "Coarse record file")->required()->check(CLI::ExistingFile);
  map->add_option("output", map_out, "Output corpus file")->required();
  add_common(map, map_common);

  // encode
  Common enc_common;
  std::string enc_in, enc_out, enc_report;
  bool enc_merge = false;
  auto* enc = app.add_subcommand("encode", "Encode a corpus into per-token tags");
  enc->add_option("corpus", enc_in, "Input corpus file")->required()->check(CLI::ExistingFile);
  enc->add_option("output", enc_out, "Output tag file (token<TAB>tag, one sentence per block)")->required();
  add_common(enc, enc_common);
  enc->add_flag("--merge-coordination", enc_merge, "Encode coordinated precipitants as one merged span");
  enc->add_option("--report", enc_report, "Write dropped mentions as JSON to this file");

  // roundtrip
  Common rt_common;
  std::string rt_in, rt_json;
  bool rt_merge = false, rt_split = false;
  auto* rt = app.add_subcommand("roundtrip", "Encode, decode and score a gold corpus against itself");
  rt->add_option("corpus", rt_in, "Gold corpus file")->required()->check(CLI::ExistingFile);
  add_common(rt, rt_common);
  rt->add_flag("--merge-coordination", rt_merge, "Encode coordinated precipitants as one merged span");
  rt->add_flag("--split-coordination", rt_split, "Split decoded coordinated precipitants again");
  rt->add_option("--json", rt_json, "Also write the report as JSON to this file");

  // train
  Common tr_common;
  std::string tr_in, tr_out, tr_embeddings;
  std::vector<std::string> tr_aux;
  std::optional<std::size_t> tr_ensemble, tr_workers;
  auto* tr = app.add_subcommand("train", "Train one model or an ensemble of independent runs");
  tr->add_option("corpus", tr_in, "Primary training corpus")->required()->check(CLI::ExistingFile);
  tr->add_option("output", tr_out, "Output directory for checkpoints and reports")->required();
  add_common(tr, tr_common);
  tr->add_option("--aux", tr_aux, "Auxiliary corpus with unit loss weight (repeatable)")->check(CLI::ExistingFile);
  tr->add_option("--embeddings", tr_embeddings, "Pre-trained word embeddings (\"V d\" header text format)")
      ->check(CLI::ExistingFile);
  tr->add_option("--ensemble", tr_ensemble, "Number of independent runs (overrides ensemble.size)");
  tr->add_option("--workers", tr_workers, "Parallel runs (overrides ensemble.workers)");

  // bootstrap
  Common bs_common;
  std::string bs_mapped, bs_seeds, bs_out, bs_review;
  auto* bs = app.add_subcommand("bootstrap", "Resolve COARSE_* PK outcomes by self-training on seed codes");
  bs->add_option("mapped", bs_mapped, "Corpus with COARSE_* PK outcomes")->required()->check(CLI::ExistingFile);
  bs->add_option("seeds", bs_seeds, "Corpus with gold PK codes")->required()->check(CLI::ExistingFile);
  bs->add_option("output", bs_out, "Output corpus with accepted codes filled in")->required();
  add_common(bs, bs_common);
  bs->add_option("--review", bs_review, "Review queue file (default: OUTPUT.review.tsv)");

  // predict
  Common pr_common;
  std::string pr_ckpt, pr_in, pr_out;
  auto* pr = app.add_subcommand("predict", "Annotate a corpus with a trained checkpoint");
  pr->add_option("checkpoint", pr_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pr->add_option("corpus", pr_in, "Corpus whose sentences are annotated (annotations ignored)")
      ->required()
      ->check(CLI::ExistingFile);
  pr->add_option("output", pr_out, "Output corpus (provenance predicted)")->required();
  add_common(pr, pr_common);

  // ensemble-merge
  Common em_common;
  std::string em_out, em_report;
  std::vector<std::string> em_in;
  std::optional<std::size_t> em_min_votes;
  auto* em = app.add_subcommand("ensemble-merge", "Vote over several prediction files");
  em->add_option("output", em_out, "Merged corpus file")->required();
  em->add_option("predictions", em_in, "Prediction files over the same corpus")->required()->check(CLI::ExistingFile);
  add_common(em, em_common);
  em->add_option("--min-votes", em_min_votes, "Minimum votes to keep an annotation (overrides ensemble.min_votes)");
  em->add_option("--report", em_report, "Tally report file (default: OUTPUT.tally.txt)");

  // score
  Common sc_common;
  std::string sc_gold, sc_pred, sc_json;
  bool sc_breakdown = false;
  auto* sc = app.add_subcommand("score", "Precision, recall and F1 of predictions against gold");
  sc->add_option("gold", sc_gold, "Gold corpus")->required()->check(CLI::ExistingFile);
  sc->add_option("prediction", sc_pred, "Predicted corpus")->required()->check(CLI::ExistingFile);
  add_common(sc, sc_common);
  sc->add_option("--json", sc_json, "Also write the scores as JSON to this file");
  sc->add_flag("--breakdown", sc_breakdown, "Also print per-kind and per-section tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      Run run("generate", gen_common, argc, argv);
      auto spec = corpus::default_generator_spec();
      spec.seed = run.config.train.seed;
      spec.labels = gen_labels;
      spec.sentences_per_label = gen_sentences;
      spec.overlap_rate = gen_overlap;
      spec.coordination_rate = gen_coordination;
      spec.coarse_pk = gen_coarse;
      run.write(gen_out, corpus::serialize_corpus(corpus::generate_corpus(spec, run.codes)));
      run.finish(gen_out);
    } else if (*map) {
      Run run("map-nlm180", map_common, argc, argv);
      run.manifest.add_input(map_in);
      auto result = corpus::map_nlm180(corpus::parse_nlm180(cli::read_file(map_in)));
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      run.write(map_out, corpus::serialize_corpus(result.corpus));
      run.finish(map_out);
    } else if (*enc) {
      Run run("encode", enc_common, argc, argv);
      const auto corpus = run.read(enc_in);
      tagging::EncodeOptions opts;
      opts.merge_coordination = enc_merge;
      std::string tags;
      nlohmann::json drops = nlohmann::json::array();
      for (const auto& label : corpus.labels) {
        const auto ctx = tagging::binding_for(label, run.config.infer.class_proxies, run.config.infer.use_class_proxies);
        for (const auto& s : label.sentences) {
          const auto r = tagging::encode(s, ctx, opts);
          tags += tag_lines(r.sequence);
          for (const auto& d : r.report.dropped)
            drops.push_back({{"sentence", d.sentence_id}, {"mention", d.mention_id}, {"reason", to_string(d.reason)}});
        }
      }
      run.write(enc_out, tags);
      if (!enc_report.empty()) run.write(enc_report, drops.dump(2) + "\n");
      std::cerr << drops.size() << " mention(s) dropped\n";
      run.finish(enc_out);
    } else if (*rt) {
      Run run("roundtrip", rt_common, argc, argv);
      const auto corpus = run.read(rt_in);
      tagging::RoundTripOptions opts;
      opts.merge_coordination = rt_merge;
      opts.split_coordination = rt_split;
      opts.coordination_heads = run.config.infer.coordination_heads;
      const auto report = tagging::roundtrip_upperbound(corpus, opts);
      std::cout << report.table();
      if (!rt_json.empty()) {
        run.write(rt_json, report.to_json());
        run.finish(rt_json);
      }
    } else if (*tr) {
      Run run("train", tr_common, argc, argv);
      const auto primary = run.read(tr_in);
      std::vector<CorpusFile> aux;
      for (const auto& a : tr_aux) aux.push_back(run.read(a));
      std::vector<const CorpusFile*> aux_ptrs;
      for (const auto& a : aux) aux_ptrs.push_back(&a);
      std::optional<corpus::EmbeddingTable> emb;
      if (!tr_embeddings.empty()) {
        run.manifest.add_input(tr_embeddings);
        emb = corpus::load_embeddings(cli::read_file(tr_embeddings), run.config.model.word_dim,
                                      train::derive_seed(run.config.train.seed, 5));
      }
      const std::size_t k = tr_ensemble.value_or(run.config.ensemble_size);
      const std::size_t workers = tr_workers.value_or(run.config.workers);
      fs::create_directories(tr_out);
      auto runs = train::train_ensemble(k, primary, aux_ptrs, run.config.model, run.codes, run.config.train,
                                        run.config.infer, workers, emb ? &*emb : nullptr);
      for (std::size_t i = 0; i < runs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "model-%02zu", i + 1);
        const std::string base = (fs::path(tr_out) / name).string();
        std::ostringstream ckpt;
        model::save_checkpoint(runs[i].model, ckpt);
        run.write(base + ".ckpt", ckpt.str());
        run.write(base + ".report.json", runs[i].report.to_json());
        std::cerr << name << ": selected epoch " << runs[i].report.selected_epoch << "\n";
      }
      run.finish((fs::path(tr_out) / "train").string());
    } else if (*bs) {
      Run run("bootstrap", bs_common, argc, argv);
      const auto mapped = run.read(bs_mapped);
      const auto seeds = run.read(bs_seeds);
      const std::vector<train::WeightedCorpus> corpora{{&seeds, tagging::WeightClass::Primary},
                                                       {&mapped, tagging::WeightClass::Auxiliary}};
      auto model = train::build_model(corpora, run.config.model, run.codes,
                                      train::derive_seed(run.config.train.seed, 2), nullptr, run.config.train);
      const auto seed_items = train::pk_candidates(model, seeds, run.config.train, tagging::WeightClass::Primary);
      auto coarse_items = train::pk_candidates(model, mapped, run.config.train, tagging::WeightClass::Auxiliary);
      std::erase_if(coarse_items, [](const train::PkCandidate& c) { return !c.coarse; });
      const auto result =
          train::bootstrap_pk(model, seed_items, coarse_items, run.codes, run.config.train, run.config.bootstrap);
      run.write(bs_out, corpus::serialize_corpus(train::apply_bootstrap(mapped, result)));
      run.write(bs_review.empty() ? bs_out + ".review.tsv" : bs_review, result.review_queue());
      std::cerr << result.accepted.size() << " accepted, " << result.review.size() << " for review, "
                << result.pending.size() << " pending after " << result.iterations << " iteration(s)\n";
      run.finish(bs_out);
    } else if (*pr) {
      Run run("predict", pr_common, argc, argv);
      run.manifest.add_input(pr_ckpt);
      auto model = model::load_checkpoint_file(pr_ckpt);
      const auto corpus = run.read(pr_in);
      infer::PostRuleStats stats;
      run.write(pr_out, corpus::serialize_corpus(infer::predict_corpus(model, corpus, run.config.infer, &stats)));
      std::cerr << "post rules: " << stats.stripped << " stripped, " << stats.purged << " purged, " << stats.split
                << " split\n";
      run.finish(pr_out);
    } else if (*em) {
      Run run("ensemble-merge", em_common, argc, argv);
      std::vector<CorpusFile> sets;
      for (const auto& p : em_in) sets.push_back(run.read(p));
      ensemble::MergeStats stats;
      const auto merged = ensemble::merge(sets, em_min_votes.value_or(run.config.min_votes), &stats);
      run.write(em_out, corpus::serialize_corpus(merged));
      run.write(em_report.empty() ? em_out + ".tally.txt" : em_report, stats.table());
      run.finish(em_out);
    } else if (*sc) {
      Run run("score", sc_common, argc, argv);
      const auto gold = run.read(sc_gold);
      const auto pred = run.read(sc_pred);
      const auto report = scoring::score(gold, pred);
      std::cout << report.table();
      if (sc_breakdown) std::cout << "\n" << scoring::score_breakdown(gold, pred).table();
      if (!sc_json.empty()) {
        run.write(sc_json, report.to_json());
        run.finish(sc_json);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
