#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ddi/error.hpp"
#include "ddi/model.hpp"
#include "ddi/utf8.hpp"

// Checkpoint layout: the magic line, one line of JSON (format version,
// model config, vocabularies, PK codes, rng state, parameter names and
// shapes), then every parameter's values as raw little-endian float64 in
// the header's order.
namespace ddi::model {
namespace {

constexpr std::string_view kMagic = "DDI-CHECKPOINT\n";
constexpr std::string_view kFormat = "ddi-checkpoint/1";

using nlohmann::json;

json config_json(const ModelConfig& c) {
  return json{{"word_dim", c.word_dim},
              {"char_dim", c.char_dim},
              {"char_filters", c.char_filters},
              {"char_window", c.char_window},
              {"hidden", c.hidden},
              {"rel_windows", c.rel_windows},
              {"rel_filters", c.rel_filters},
              {"ner_classes", c.ner_classes},
              {"pk_classes", c.pk_classes},
              {"pd_classes", c.pd_classes},
              {"dropout", c.dropout},
              {"max_sentence_len", c.max_sentence_len},
              {"max_word_len", c.max_word_len},
              {"residual_words", c.residual_words},
              {"init_scale", c.init_scale},
              {"forget_bias", c.forget_bias}};
}

ModelConfig config_of(const json& j) {
  ModelConfig c;
  try {
    c.word_dim = j.at("word_dim");
    c.char_dim = j.at("char_dim");
    c.char_filters = j.at("char_filters");
    c.char_window = j.at("char_window");
    c.hidden = j.at("hidden");
    c.rel_windows = j.at("rel_windows").get<std::vector<std::size_t>>();
    c.rel_filters = j.at("rel_filters");
    c.ner_classes = j.at("ner_classes");
    c.pk_classes = j.at("pk_classes");
    c.pd_classes = j.at("pd_classes");
    c.dropout = j.at("dropout");
    c.max_sentence_len = j.at("max_sentence_len");
    c.max_word_len = j.at("max_word_len");
    c.residual_words = j.at("residual_words");
    c.init_scale = j.at("init_scale");
    c.forget_bias = j.at("forget_bias");
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  c.check();
  return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& c) { return config_json(c).dump(); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_of(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

void save_checkpoint(const Model& m, std::ostream& out) {
  json header;
  header["format"] = kFormat;
  header["config"] = config_json(m.config_);
  header["words"] = m.vocab_.words();
  std::vector<std::uint32_t> chars(m.vocab_.chars().begin(), m.vocab_.chars().end());
  header["chars"] = chars;
  header["codes"] = m.codes_.serialize();
  std::ostringstream rng;
  rng << m.rng_;
  header["rng"] = rng.str();
  json params = json::array();
  for (const auto& [name, p] : m.params_.all()) params.push_back({{"name", name}, {"shape", p.value.shape}});
  header["params"] = params;

  out << kMagic << header.dump() << '\n';
  for (const auto& [_, p] : m.params_.all()) {
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
  }
  if (!out) throw Error("failed to write checkpoint");
}

Model load_checkpoint(std::istream& in) {
  std::string magic(kMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kMagic) throw ParseError("not a checkpoint file (bad magic)");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), 2);
  }
  if (header.value("format", "") != kFormat) throw ParseError("checkpoint: unsupported format");

  ModelConfig config = config_of(header.at("config"));
  Vocabulary vocab;
  for (const auto& w : header.at("words")) vocab.add_word(w.get<std::string>());
  if (vocab.word_count() != header.at("words").size()) throw DataError("checkpoint: word vocabulary has duplicates");
  for (const auto& c : header.at("chars")) vocab.add_char(static_cast<char32_t>(c.get<std::uint32_t>()));
  CodeVocabulary codes = CodeVocabulary::parse(header.at("codes").get<std::string>());

  Model m(Model::Uninitialized{}, std::move(config), std::move(vocab), std::move(codes));
  const auto& listed = header.at("params");
  if (listed.size() != m.params_.size()) throw DataError("checkpoint: parameter count does not match the config");
  auto it = m.params_.all().begin();
  for (const auto& entry : listed) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<nn::Shape>();
    if (it->first != name || it->second.value.shape != shape) {
      throw DataError("checkpoint: parameter " + name + " " + nn::shape_string(shape) + " does not match the config");
    }
    auto& data = it->second.value.data;
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated data for parameter " + name);
    ++it;
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint: trailing bytes after parameter data");
  std::istringstream rng(header.at("rng").get<std::string>());
  rng >> m.rng_;
  if (!rng) throw DataError("checkpoint: bad rng state");
  m.run_audit();
  return m;
}

void save_checkpoint_file(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_checkpoint(m, out);
}

Model load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace ddi::model
