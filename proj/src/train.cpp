#include "ddi/train.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ddi/error.hpp"
#include "ddi/utf8.hpp"

namespace ddi::train {

using tagging::WeightClass;

void TrainConfig::check() const {
  if (epochs == 0) throw UsageError("train: epochs must be positive");
  if (target_iterations == 0) throw UsageError("train: target_iterations must be positive");
  if (!(non_o_weight > 0.0)) throw UsageError("train: non_o_weight must be positive");
  if (!(primary_weight > 0.0)) throw UsageError("train: primary_weight must be positive");
  if (!(encoder_grad_scale >= 0.0)) throw UsageError("train: encoder_grad_scale must be non-negative");
  adam.check();
}

void BootstrapConfig::check() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw UsageError("bootstrap: threshold must lie in (0, 1]");
  if (max_iterations == 0) throw UsageError("bootstrap: max_iterations must be positive");
  if (epochs_per_iteration == 0) throw UsageError("bootstrap: epochs_per_iteration must be positive");
}

std::size_t minibatch_size(std::size_t n, std::size_t target_iterations) {
  if (n == 0) throw UsageError("minibatch size of an empty training set");
  if (target_iterations == 0) throw UsageError("target_iterations must be positive");
  return n / target_iterations + 1;
}

std::size_t iterations_per_epoch(std::size_t n, std::size_t target_iterations) {
  const std::size_t b = minibatch_size(n, target_iterations);
  return (n + b - 1) / b;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double weight_of(WeightClass w, const TrainConfig& c) { return w == WeightClass::Primary ? c.primary_weight : 1.0; }

tagging::BindingContext binding(const DrugLabel& label, const TrainConfig& c) {
  return tagging::binding_for(label, c.class_proxies, c.use_class_proxies);
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t target, std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> out;
  if (n == 0) return out;
  const std::size_t b = minibatch_size(n, target);
  const auto idx = shuffled(n, rng);
  for (std::size_t i = 0; i < n; i += b)
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + b)));
  return out;
}

nn::Var loss_of(model::Model& model, nn::Graph& g, Objective objective, const TrainingSet& data, std::size_t index,
                const TrainConfig& config, bool train_mode) {
  if (objective == Objective::NER) {
    const auto& ex = data.ner.at(index);
    const auto ctx = model.context(g, ex.input, train_mode);
    const auto logits = model.ner_logits(g, ctx, train_mode);
    return model::ner_loss(g, logits, ex.tags, ex.input.length, config.non_o_weight, ex.weight);
  }
  const auto& ex = objective == Objective::PK ? data.pk.at(index) : data.pd.at(index);
  const auto ctx = model.context(g, ex.input, train_mode);
  const auto v = model.outcome_vector(g, ctx, ex.bound, config.encoder_grad_scale, train_mode);
  const auto logits = objective == Objective::PK ? model.pk_logits(g, v) : model.pd_logits(g, v);
  return model::outcome_loss(g, logits, ex.target, ex.weight);
}

std::vector<std::vector<double>> snapshot(const model::Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto& [_, p] : model.params().all()) out.push_back(p.value.data);
  return out;
}

void restore(model::Model& model, const std::vector<std::vector<double>>& saved) {
  std::size_t i = 0;
  for (auto& [_, p] : model.params().all()) p.value.data = saved[i++];
}

nlohmann::json counts_json(const scoring::Counts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

}  // namespace

std::vector<std::vector<tagging::Token>> corpus_tokens(const std::vector<WeightedCorpus>& corpora,
                                                       const TrainConfig& config) {
  std::vector<std::vector<tagging::Token>> out;
  for (const auto& wc : corpora) {
    for (const auto& label : wc.corpus->labels) {
      const auto ctx = binding(label, config);
      for (const auto& s : label.sentences) out.push_back(tagging::bind_label_drug(tagging::tokenize(s.text), ctx));
    }
  }
  return out;
}

model::Model build_model(const std::vector<WeightedCorpus>& corpora, model::ModelConfig config,
                         const CodeVocabulary& codes, std::uint64_t seed, const corpus::EmbeddingTable* embeddings,
                         const TrainConfig& train_config) {
  const auto tokens = corpus_tokens(corpora, train_config);
  std::size_t n = 1, m = 1;
  for (const auto& s : tokens) {
    n = std::max(n, s.size());
    for (const auto& t : s) m = std::max(m, utf8::length(t.text));
  }
  config.max_sentence_len = n;
  config.max_word_len = m;
  config.pk_classes = codes.size();
  if (embeddings) config.word_dim = embeddings->dim;
  return model::Model(config, model::Vocabulary::build(tokens, embeddings), codes, seed, embeddings);
}

TrainingSet make_training_set(const model::Model& model, const std::vector<WeightedCorpus>& corpora,
                              const TrainConfig& config) {
  TrainingSet set;
  for (const auto& wc : corpora) {
    const double w = weight_of(wc.weight, config);
    tagging::EncodeOptions opts;
    opts.merge_coordination = config.merge_coordination;
    opts.weight_class = wc.weight;
    for (const auto& label : wc.corpus->labels) {
      const auto ctx = binding(label, config);
      for (const auto& s : label.sentences) {
        const auto enc = tagging::encode(s, ctx, opts);
        const auto& tokens = enc.sequence.tokens;
        if (tokens.empty()) continue;
        NerExample ner{s.id, model.make_input(tokens), {}, w};
        for (auto t : enc.sequence.tags) ner.tags.push_back(static_cast<int>(t));
        const auto input = ner.input;
        set.ner.push_back(std::move(ner));

        const auto& kept = enc.report.kept;
        std::set<std::pair<std::size_t, std::size_t>> linked;
        for (const auto& r : enc.report.relations) {
          if (r.kind == InteractionKind::PD && r.effect) linked.emplace(r.precipitant, *r.effect);
          if (r.kind != InteractionKind::PK) continue;
          const std::string code = r.code.value_or("");
          if (is_coarse_marker(code)) {
            throw DataError("sentence " + s.id + " interaction " + r.interaction_id + " has the unresolved PK outcome " +
                            code + "; run bootstrap first");
          }
          const auto idx = model.codes().index_of(code);
          if (!idx) throw DataError("sentence " + s.id + ": PK code " + code + " is not in the code vocabulary");
          set.pk.push_back(OutcomeExample{s.id + "/" + r.interaction_id, input,
                                          model.make_input(tagging::entity_bind(tokens, kept[r.precipitant].tokens)),
                                          static_cast<int>(*idx), w});
        }
        for (std::size_t p = 0; p < kept.size(); ++p) {
          if (kept[p].kind != MentionKind::Precipitant || kept[p].interaction_kind != InteractionKind::PD) continue;
          for (std::size_t e = 0; e < kept.size(); ++e) {
            if (kept[e].kind != MentionKind::SpecificInteraction) continue;
            const auto bound = tagging::entity_bind(tokens, kept[p].tokens, kept[e].tokens);
            const std::string id = s.id + "/" + kept[p].source_ids.front() + "/" + kept[e].source_ids.front();
            set.pd.push_back(OutcomeExample{id, input, model.make_input(bound), linked.count({p, e}) ? 1 : 0, w});
          }
        }
      }
    }
  }
  return set;
}

double train_step(model::Model& model, Objective objective, const TrainingSet& data,
                  const std::vector<std::size_t>& batch, const TrainConfig& config, nn::AdamState& adam) {
  if (batch.empty()) return 0.0;
  model.params().zero_grad();
  const double seed = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (auto i : batch) {
    nn::Graph g;
    const auto loss = loss_of(model, g, objective, data, i, config, true);
    total += g.value(loss)[0];
    g.backward(loss, seed);
  }
  nn::adam_step(model.params(), adam);
  return total * seed;
}

double example_loss(model::Model& model, Objective objective, const TrainingSet& data, std::size_t index,
                    const TrainConfig& config, bool train_mode) {
  nn::Graph g;
  return g.value(loss_of(model, g, objective, data, index, config, train_mode))[0];
}

TrainReport train(model::Model& model, const std::vector<WeightedCorpus>& corpora, const CorpusFile& dev,
                  const TrainConfig& config, const infer::InferConfig& infer_config) {
  config.check();
  const TrainingSet data = make_training_set(model, corpora, config);
  if (data.ner.empty()) throw DataError("training corpus has no sentences");

  TrainReport report;
  report.seed = config.seed;
  for (const auto& l : dev.labels) report.dev_label_ids.push_back(l.id);
  const bool has_dev = std::any_of(dev.labels.begin(), dev.labels.end(),
                                   [](const DrugLabel& l) { return !l.sentences.empty(); });

  std::mt19937_64 rng(derive_seed(config.seed, 3));
  nn::AdamState adam = config.adam;
  std::vector<std::vector<double>> best;
  double best_rel = -1.0, best_ent = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto ner = batches(data.ner.size(), config.target_iterations, rng);
    const auto pk = batches(data.pk.size(), config.target_iterations, rng);
    const auto pd = batches(data.pd.size(), config.target_iterations, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.iterations = ner.size();
    for (std::size_t it = 0; it < ner.size(); ++it) {
      rec.ner_loss += train_step(model, Objective::NER, data, ner[it], config, adam);
      if (it < pk.size()) rec.pk_loss += train_step(model, Objective::PK, data, pk[it], config, adam);
      if (it < pd.size()) rec.pd_loss += train_step(model, Objective::PD, data, pd[it], config, adam);
    }
    rec.ner_loss /= static_cast<double>(ner.size());
    if (!pk.empty()) rec.pk_loss /= static_cast<double>(std::min(pk.size(), ner.size()));
    if (!pd.empty()) rec.pd_loss /= static_cast<double>(std::min(pd.size(), ner.size()));

    bool better = !config.select_checkpoint || best.empty();
    if (has_dev) {
      rec.dev = scoring::score(dev, infer::predict_corpus(model, dev, infer_config));
      const double rel = rec.dev.relation_primary.f1();
      const double ent = rec.dev.entity_primary.f1();
      if (config.select_checkpoint && (rel > best_rel || (rel == best_rel && ent > best_ent))) better = true;
      if (better) best_rel = rel, best_ent = ent;
    } else if (!config.select_checkpoint) {
      better = true;
    }
    if (better) {
      best = snapshot(model);
      report.selected_epoch = epoch;
    }
    report.epochs.push_back(std::move(rec));
  }
  // Without a dev split there is nothing to select on: keep the final epoch.
  if (!has_dev) {
    report.selected_epoch = config.epochs;
  } else {
    restore(model, best);
  }
  return report;
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["selected_epoch"] = selected_epoch;
  j["dev_labels"] = dev_label_ids;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : epochs) {
    list.push_back({{"epoch", e.epoch},
                    {"iterations", e.iterations},
                    {"ner_loss", e.ner_loss},
                    {"pk_loss", e.pk_loss},
                    {"pd_loss", e.pd_loss},
                    {"dev",
                     {{"entity_primary", counts_json(e.dev.entity_primary)},
                      {"entity_relaxed", counts_json(e.dev.entity_relaxed)},
                      {"relation_primary", counts_json(e.dev.relation_primary)},
                      {"relation_relaxed", counts_json(e.dev.relation_relaxed)},
                      {"relation_primary_f1", e.dev.relation_primary.f1()},
                      {"entity_primary_f1", e.dev.entity_primary.f1()}}}});
  }
  j["epochs"] = list;
  return j.dump(2) + "\n";
}

std::pair<CorpusFile, CorpusFile> split_dev(const CorpusFile& corpus, std::size_t dev_labels, std::uint64_t seed) {
  if (dev_labels >= corpus.labels.size() && dev_labels > 0) {
    throw UsageError("dev split of " + std::to_string(dev_labels) + " labels leaves no training labels (corpus has " +
                     std::to_string(corpus.labels.size()) + ")");
  }
  std::mt19937_64 rng(derive_seed(seed, 1));
  const auto order = shuffled(corpus.labels.size(), rng);
  std::set<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_labels));
  CorpusFile train = corpus, dev = corpus;
  train.labels.clear();
  dev.labels.clear();
  train.metadata = {};
  dev.metadata = {};
  for (std::size_t i = 0; i < corpus.labels.size(); ++i)
    (chosen.count(i) ? dev : train).labels.push_back(corpus.labels[i]);
  return {std::move(train), std::move(dev)};
}

RunResult train_run(const CorpusFile& primary, const std::vector<const CorpusFile*>& auxiliary,
                    const model::ModelConfig& model_config, const CodeVocabulary& codes, TrainConfig config,
                    const infer::InferConfig& infer_config, const corpus::EmbeddingTable* embeddings) {
  config.check();
  auto [train_part, dev] = split_dev(primary, config.dev_labels, config.seed);
  std::vector<WeightedCorpus> corpora{{&train_part, WeightClass::Primary}};
  for (const auto* a : auxiliary) corpora.push_back({a, WeightClass::Auxiliary});
  auto model = build_model(corpora, model_config, codes, derive_seed(config.seed, 2), embeddings, config);
  auto report = train(model, corpora, dev, config, infer_config);
  return RunResult{std::move(model), std::move(report)};
}

std::vector<RunResult> train_ensemble(std::size_t k, const CorpusFile& primary,
                                      const std::vector<const CorpusFile*>& auxiliary,
                                      const model::ModelConfig& model_config, const CodeVocabulary& codes,
                                      const TrainConfig& config, const infer::InferConfig& infer_config,
                                      std::size_t workers, const corpus::EmbeddingTable* embeddings) {
  if (k == 0) throw UsageError("ensemble size must be positive");
  workers = std::clamp<std::size_t>(workers, 1, k);
  std::vector<std::optional<RunResult>> results(k);
  std::vector<std::exception_ptr> errors(k);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < k;) {
      try {
        TrainConfig c = config;
        c.seed = config.seed + i;
        results[i].emplace(train_run(primary, auxiliary, model_config, codes, c, infer_config, embeddings));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<RunResult> out;
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

// ---------------------------------------------------------------- bootstrap

std::string BootstrapResult::review_queue() const {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  for (const auto& r : review)
    out << r.id << '\t' << r.predicted_code << '\t' << coarse_marker(r.coarse) << '\t' << r.confidence << '\n';
  return out.str();
}

std::vector<PkCandidate> pk_candidates(const model::Model& model, const CorpusFile& corpus, const TrainConfig& config,
                                       WeightClass weight) {
  std::vector<PkCandidate> out;
  tagging::EncodeOptions opts;
  opts.merge_coordination = config.merge_coordination;
  opts.weight_class = weight;
  for (const auto& label : corpus.labels) {
    const auto ctx = binding(label, config);
    for (const auto& s : label.sentences) {
      const auto enc = tagging::encode(s, ctx, opts);
      const auto& tokens = enc.sequence.tokens;
      for (const auto& r : enc.report.relations) {
        if (r.kind != InteractionKind::PK) continue;
        PkCandidate c;
        c.id = s.id + "/" + r.interaction_id;
        c.input = model.make_input(tokens);
        c.bound = model.make_input(tagging::entity_bind(tokens, enc.report.kept[r.precipitant].tokens));
        c.weight = weight_of(weight, config);
        const std::string code = r.code.value_or("");
        if (auto d = coarse_direction(code)) {
          c.coarse = d;
        } else {
          if (!model.codes().contains(code)) throw DataError("sentence " + s.id + ": unknown PK code " + code);
          c.code = code;
        }
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

BootstrapResult bootstrap_pk(model::Model& model, const std::vector<PkCandidate>& seeds,
                             const std::vector<PkCandidate>& coarse, const CodeVocabulary& codes,
                             const TrainConfig& train_config, const BootstrapConfig& config) {
  config.check();
  train_config.check();
  BootstrapResult result;
  std::vector<std::size_t> pending(coarse.size());
  std::iota(pending.begin(), pending.end(), 0);
  for (const auto& c : coarse) {
    if (!c.coarse) throw UsageError("bootstrap: candidate " + c.id + " has no coarse label");
    result.pending.push_back(c.id);
  }
  if (pending.empty()) return result;

  TrainingSet data;
  auto add = [&](const PkCandidate& c, const std::string& code) {
    const auto idx = codes.index_of(code);
    if (!idx) throw DataError("bootstrap: unknown PK code " + code);
    data.pk.push_back(OutcomeExample{c.id, c.input, c.bound, static_cast<int>(*idx), c.weight});
  };
  for (const auto& s : seeds) {
    if (!s.code) throw UsageError("bootstrap: seed " + s.id + " has no code");
    add(s, *s.code);
  }
  if (data.pk.empty()) throw DataError("bootstrap: no seed examples with PK codes");

  std::mt19937_64 rng(derive_seed(train_config.seed, 4));
  nn::AdamState adam = train_config.adam;
  for (std::size_t iter = 1; iter <= config.max_iterations && !pending.empty(); ++iter) {
    result.iterations = iter;
    for (std::size_t e = 0; e < config.epochs_per_iteration; ++e)
      for (const auto& b : batches(data.pk.size(), train_config.target_iterations, rng))
        train_step(model, Objective::PK, data, b, train_config, adam);

    std::vector<std::size_t> still;
    for (auto i : pending) {
      const auto& c = coarse[i];
      nn::Graph g;
      const auto ctx = model.context(g, c.input, false);
      const auto logits = model.pk_logits(g, model.outcome_vector(g, ctx, c.bound, 1.0, false));
      const auto p = nn::softmax(g.value(logits).data);
      const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      const std::string& code = codes.at(best).code;
      if (p[best] < config.threshold) {
        still.push_back(i);
      } else if (codes.direction_of(code) != c.coarse) {
        result.review.push_back(ReviewItem{c.id, code, *c.coarse, p[best], iter});
      } else {
        result.accepted.push_back(Acceptance{c.id, code, p[best], iter});
        add(c, code);
      }
    }
    pending = std::move(still);
  }
  result.pending.clear();
  for (auto i : pending) result.pending.push_back(coarse[i].id);
  return result;
}

CorpusFile apply_bootstrap(const CorpusFile& mapped, const BootstrapResult& result) {
  std::map<std::string, std::string> code_of;
  for (const auto& a : result.accepted) code_of[a.id] = a.code;
  CorpusFile out = mapped;
  for (auto& label : out.labels)
    for (auto& s : label.sentences)
      for (auto& in : s.interactions) {
        auto* pk = std::get_if<PkCode>(&in.outcome);
        if (!pk || !is_coarse_marker(pk->code)) continue;
        auto it = code_of.find(s.id + "/" + in.id);
        if (it != code_of.end()) pk->code = it->second;
      }
  return out;
}

}  // namespace ddi::train
