#include "sce/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sce/data.hpp"
#include "sce/error.hpp"

namespace sce {
namespace {

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::vector<std::string> next(const char* expecting) {
    std::string line;
    ++line_;
    if (!std::getline(in_, line)) fail(std::string("truncated: expected ") + expecting);
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(t);
    return tokens;
  }

  std::vector<std::string> keyed(const std::string& key) {
    auto tokens = next(key.c_str());
    if (tokens.empty() || tokens[0] != key) fail("expected '" + key + "'");
    tokens.erase(tokens.begin());
    return tokens;
  }

  std::string single(const std::string& key) {
    const auto tokens = keyed(key);
    if (tokens.size() != 1) fail("'" + key + "' takes exactly one value");
    return tokens[0];
  }

  std::uint64_t number(const std::string& key) { return to_u64(single(key), key); }

  std::uint64_t to_u64(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) fail("bad integer for " + what + ": " + text);
    return v;
  }

  std::vector<std::size_t> widths(const std::string& key) {
    std::vector<std::size_t> out;
    for (const auto& t : keyed(key)) out.push_back(to_u64(t, key));
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(source_ + ":" + std::to_string(line_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

void write_widths(std::ostream& out, const char* key, const std::vector<std::size_t>& widths) {
  out << key;
  for (auto w : widths) out << ' ' << w;
  out << '\n';
}

}  // namespace

void write_checkpoint(std::ostream& out, const SceModel& model) {
  const auto& s = model.shape();
  out << "sce-checkpoint " << kCheckpointVersion << '\n';
  out << "feature_dim " << s.feature_dim << '\n';
  out << "embed_dim " << s.embed_dim << '\n';
  out << "conditions " << s.conditions << '\n';
  out << "text_dim " << s.text_dim << '\n';
  out << "branch_mode " << to_string(s.mode) << '\n';
  write_widths(out, "encoder_hidden", s.encoder_hidden);
  write_widths(out, "branch_hidden", s.branch_hidden);
  out << "weight_source " << to_string(model.weight_source()) << '\n';
  out << "random_seed " << model.random_seed() << '\n';
  out << "condition_labels";
  for (const auto& l : model.condition_labels()) out << ' ' << l;
  out << '\n';
  out << "masks_trainable " << (model.params()[model.masks_index()].trainable ? 1 : 0) << '\n';
  for (const auto& p : model.params()) {
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      const auto row = p.value.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << format_double(row[c]);
      out << '\n';
    }
  }
  out << "end\n";
}

SceModel read_checkpoint(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  const auto header = reader.next("header");
  if (header.size() != 2 || header[0] != "sce-checkpoint") reader.fail("not an sce checkpoint");
  if (header[1] != std::to_string(kCheckpointVersion)) {
    reader.fail("unsupported checkpoint version " + header[1] + " (expected " + std::to_string(kCheckpointVersion) +
                ")");
  }

  ModelShape shape;
  shape.feature_dim = reader.number("feature_dim");
  shape.embed_dim = reader.number("embed_dim");
  shape.conditions = reader.number("conditions");
  shape.text_dim = reader.number("text_dim");
  try {
    shape.mode = parse_branch_mode(reader.single("branch_mode"));
  } catch (const ConfigError& e) {
    reader.fail(e.what());
  }
  shape.encoder_hidden = reader.widths("encoder_hidden");
  shape.branch_hidden = reader.widths("branch_hidden");

  WeightSource source_kind = WeightSource::learned;
  try {
    source_kind = parse_weight_source(reader.single("weight_source"));
  } catch (const ConfigError& e) {
    reader.fail(e.what());
  }
  const std::uint64_t random_seed = reader.number("random_seed");
  auto labels = reader.keyed("condition_labels");
  const auto masks_trainable = reader.number("masks_trainable");

  std::optional<SceModel> built;
  try {
    built.emplace(shape);
    built->set_weight_source(source_kind, random_seed);
    built->set_condition_labels(std::move(labels));
    built->set_masks_trainable(masks_trainable != 0);
  } catch (const ConfigError& e) {
    reader.fail(e.what());
  }
  SceModel& model = *built;

  for (auto& p : model.params()) {
    const auto decl = reader.keyed("param");
    if (decl.size() != 3) reader.fail("malformed param declaration");
    if (decl[0] != p.name) reader.fail("expected parameter '" + p.name + "', found '" + decl[0] + "'");
    const auto rows = reader.to_u64(decl[1], p.name + " rows");
    const auto cols = reader.to_u64(decl[2], p.name + " cols");
    if (rows != p.value.rows() || cols != p.value.cols()) {
      reader.fail("parameter '" + p.name + "' is " + decl[1] + "x" + decl[2] + ", shape requires " +
                  std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const auto values = reader.next(p.name.c_str());
      if (values.size() != cols) reader.fail("parameter '" + p.name + "' row has " + std::to_string(values.size()) +
                                             " values, expected " + std::to_string(cols));
      for (std::size_t c = 0; c < cols; ++c) {
        const auto v = parse_double(values[c]);
        if (!v) reader.fail("bad number '" + values[c] + "' in parameter '" + p.name + "'");
        p.value(r, c) = *v;
      }
    }
  }
  const auto trailer = reader.next("end");
  if (trailer.size() != 1 || trailer[0] != "end") reader.fail("expected 'end'");
  return std::move(model);
}

void save_checkpoint(const SceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_checkpoint(out, model);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

SceModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

void require_shape(const SceModel& model, const ModelShape& expected) {
  const auto& s = model.shape();
  auto mismatch = [](const char* field, const std::string& have, const std::string& want) {
    throw CheckpointError(std::string("checkpoint shape mismatch in ") + field + ": checkpoint has " + have +
                          ", configuration expects " + want);
  };
  auto join = [](const std::vector<std::size_t>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out + "]";
  };
  if (s.feature_dim != expected.feature_dim) {
    mismatch("feature_dim (F)", std::to_string(s.feature_dim), std::to_string(expected.feature_dim));
  }
  if (s.embed_dim != expected.embed_dim) {
    mismatch("embed_dim (D)", std::to_string(s.embed_dim), std::to_string(expected.embed_dim));
  }
  if (s.conditions != expected.conditions) {
    mismatch("conditions (M)", std::to_string(s.conditions), std::to_string(expected.conditions));
  }
  if (s.text_dim != expected.text_dim) mismatch("text_dim (T)", std::to_string(s.text_dim), std::to_string(expected.text_dim));
  if (s.mode != expected.mode) mismatch("branch_mode", to_string(s.mode), to_string(expected.mode));
  if (s.encoder_hidden != expected.encoder_hidden) {
    mismatch("encoder_hidden", join(s.encoder_hidden), join(expected.encoder_hidden));
  }
  if (s.branch_hidden != expected.branch_hidden) {
    mismatch("branch_hidden", join(s.branch_hidden), join(expected.branch_hidden));
  }
}

}  // namespace sce
