#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ddi/corpus.hpp"
#include "ddi/infer.hpp"
#include "ddi/model.hpp"
#include "ddi/nn/tensor.hpp"
#include "ddi/score.hpp"
#include "ddi/tagging.hpp"

// Interleaved multi-task training, checkpoint selection on a development
// split, ensembles of independent runs, and PK-outcome bootstrapping.
namespace ddi::train {

struct TrainConfig {
  std::size_t epochs = 30;
  /// Target minibatch steps per epoch; drives N_b.
  std::size_t target_iterations = 300;
  double non_o_weight = 10.0;
  double primary_weight = 3.0;
  double encoder_grad_scale = 0.1;
  std::size_t dev_labels = 4;
  std::uint64_t seed = 1;
  nn::AdamState adam;
  /// Encode coordinated precipitants as one merged span.
  bool merge_coordination = false;
  /// Bind these class terms when a sentence never names the label drug.
  std::vector<std::string> class_proxies;
  bool use_class_proxies = false;
  /// Keep the epoch with the best development score; false keeps the last epoch.
  bool select_checkpoint = true;

  void check() const;
};

/// N_b = floor(N / target) + 1. Throws UsageError for N == 0.
std::size_t minibatch_size(std::size_t n, std::size_t target_iterations = 300);
/// ceil(N / N_b).
std::size_t iterations_per_epoch(std::size_t n, std::size_t target_iterations = 300);

/// Independent 64-bit stream derived from a seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct WeightedCorpus {
  const CorpusFile* corpus = nullptr;
  tagging::WeightClass weight = tagging::WeightClass::Primary;
};

struct NerExample {
  std::string id;
  model::Input input;
  std::vector<int> tags;
  double weight = 1.0;
};

struct OutcomeExample {
  std::string id;  // "sentence_id/interaction_id" for PK; "sentence_id/precipitant/effect" for PD
  model::Input input;
  model::Input bound;
  int target = 0;
  double weight = 1.0;
};

struct TrainingSet {
  std::vector<NerExample> ner;
  std::vector<OutcomeExample> pk;
  std::vector<OutcomeExample> pd;
};

/// Token sequences (label drug bound) of every sentence, for vocabulary building and n/m.
std::vector<std::vector<tagging::Token>> corpus_tokens(const std::vector<WeightedCorpus>& corpora,
                                                       const TrainConfig& config = {});

/// Builds a model whose n and m are the maxima over `corpora` and whose
/// vocabulary covers them (plus the embedding table when given).
model::Model build_model(const std::vector<WeightedCorpus>& corpora, model::ModelConfig config,
                         const CodeVocabulary& codes, std::uint64_t seed,
                         const corpus::EmbeddingTable* embeddings = nullptr, const TrainConfig& train_config = {});

/// Encodes corpora into per-objective examples. PD examples pair every kept
/// PD precipitant with every kept effect (linked pairs positive). Throws
/// DataError on an unresolved COARSE_* PK outcome.
TrainingSet make_training_set(const model::Model& model, const std::vector<WeightedCorpus>& corpora,
                              const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double ner_loss = 0.0;
  double pk_loss = 0.0;
  double pd_loss = 0.0;
  std::size_t iterations = 0;
  scoring::ScoreReport dev;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  std::vector<std::string> dev_label_ids;

  std::string to_json() const;
  bool operator==(const TrainReport&) const = default;
};

/// One minibatch step on one objective: mean of the example losses, backward,
/// then an Adam update. Returns the mean loss.
enum class Objective { NER, PK, PD };
double train_step(model::Model& model, Objective objective, const TrainingSet& data,
                  const std::vector<std::size_t>& batch, const TrainConfig& config, nn::AdamState& adam);

/// Loss of one example without updating anything (inference mode).
double example_loss(model::Model& model, Objective objective, const TrainingSet& data, std::size_t index,
                    const TrainConfig& config, bool train_mode = false);

/// Round-robin NER -> PK -> PD minibatch training. After each epoch the dev
/// corpus is predicted and scored; the model is left holding the parameters
/// of the best epoch (relation primary F1, then entity primary F1).
TrainReport train(model::Model& model, const std::vector<WeightedCorpus>& corpora, const CorpusFile& dev,
                  const TrainConfig& config, const infer::InferConfig& infer_config);

/// Splits `dev_labels` randomly chosen labels off the corpus.
std::pair<CorpusFile, CorpusFile> split_dev(const CorpusFile& corpus, std::size_t dev_labels, std::uint64_t seed);

struct RunResult {
  model::Model model;
  TrainReport report;
};

/// One complete run: dev split drawn from `seed`, model built and trained.
RunResult train_run(const CorpusFile& primary, const std::vector<const CorpusFile*>& auxiliary,
                    const model::ModelConfig& model_config, const CodeVocabulary& codes, TrainConfig config,
                    const infer::InferConfig& infer_config, const corpus::EmbeddingTable* embeddings = nullptr);

/// k independent runs with seeds seed+i, executed on up to `workers` threads.
std::vector<RunResult> train_ensemble(std::size_t k, const CorpusFile& primary,
                                      const std::vector<const CorpusFile*>& auxiliary,
                                      const model::ModelConfig& model_config, const CodeVocabulary& codes,
                                      const TrainConfig& config, const infer::InferConfig& infer_config,
                                      std::size_t workers = 1, const corpus::EmbeddingTable* embeddings = nullptr);

// ---------------------------------------------------------------- bootstrap

struct BootstrapConfig {
  double threshold = 0.7;
  std::size_t max_iterations = 10;
  /// PK-objective epochs per bootstrap iteration.
  std::size_t epochs_per_iteration = 10;

  void check() const;
};

struct PkCandidate {
  std::string id;  // "sentence_id/interaction_id"
  model::Input input;
  model::Input bound;
  std::optional<std::string> code;      // known for seeds
  std::optional<Direction> coarse;      // known for coarse examples
  double weight = 1.0;
};

struct Acceptance {
  std::string id;
  std::string code;
  double confidence = 0.0;
  std::size_t iteration = 0;
};

struct ReviewItem {
  std::string id;
  std::string predicted_code;
  Direction coarse;
  double confidence = 0.0;
  std::size_t iteration = 0;
};

struct BootstrapResult {
  std::vector<Acceptance> accepted;
  std::vector<ReviewItem> review;
  std::vector<std::string> pending;
  std::size_t iterations = 0;

  /// One line per item: id, predicted code, coarse label, confidence (tab-separated).
  std::string review_queue() const;
};

/// PK candidates from a corpus: gold codes become seeds, COARSE_* markers coarse examples.
std::vector<PkCandidate> pk_candidates(const model::Model& model, const CorpusFile& corpus, const TrainConfig& config,
                                       tagging::WeightClass weight);

/// Self-training loop on the PK head: train on seeds plus accepted examples,
/// then predict every pending example. A prediction with confidence >=
/// threshold is accepted when its direction agrees with the coarse label and
/// queued for review when it does not; less confident ones stay pending.
BootstrapResult bootstrap_pk(model::Model& model, const std::vector<PkCandidate>& seeds,
                             const std::vector<PkCandidate>& coarse, const CodeVocabulary& codes,
                             const TrainConfig& train_config, const BootstrapConfig& config);

/// Replaces COARSE_* outcomes of accepted examples with their codes.
CorpusFile apply_bootstrap(const CorpusFile& mapped, const BootstrapResult& result);

}  // namespace ddi::train
