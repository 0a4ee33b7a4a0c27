#include "intentloop/model_io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "intentloop/error.hpp"

namespace intentloop {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = text.find(sep, pos);
    out.emplace_back(text.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

struct Block {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<double> values;  // row-major
};

void put_matrix(std::ostream& out, std::string_view name, const Eigen::MatrixXd& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  std::vector<unsigned char> bytes(values.size() * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  out << "matrix " << name << " " << m.rows() << " " << m.cols() << " " << base64_encode(bytes)
      << "\n";
}

Eigen::MatrixXd to_matrix(const Block& b) {
  Eigen::MatrixXd m(b.rows, b.cols);
  for (Eigen::Index r = 0; r < b.rows; ++r) {
    for (Eigen::Index c = 0; c < b.cols; ++c) m(r, c) = b.values[static_cast<std::size_t>(r * b.cols + c)];
  }
  return m;
}

Eigen::MatrixXd row_of(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_vector(const Eigen::MatrixXd& m) {
  return {m.data(), m.data() + m.size()};
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    unsigned v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) fail(ErrorKind::format, "base64 length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    unsigned v = 0;
    int pad = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = value(c);
      if (d < 0 || pad) fail(ErrorKind::format, "invalid base64 character");
      v = (v << 6) | static_cast<unsigned>(d);
    }
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  return out;
}

void write_model(std::ostream& out, const IntentModel& m, const Provenance& provenance) {
  out << kModelMagic << " " << kModelVersion << "\n";
  write_provenance(out, provenance);
  out << "rate " << format_double(m.filter.rate) << "\n";
  out << "filter.low_hz " << format_double(m.filter.low_hz) << "\n";
  out << "filter.high_hz " << format_double(m.filter.high_hz) << "\n";
  out << "filter.order " << m.filter.order << "\n";
  out << "k " << m.channels.size() << "\n";
  out << "threshold " << format_double(m.threshold) << "\n";
  out << "recording_channels " << join(m.recording_channels) << "\n";
  out << "channels " << join(m.channels) << "\n";
  out << "ranking.order " << join(m.ranking.order) << "\n";
  out << "ranking.drift_order " << join(m.ranking.drift_order) << "\n";
  out << "ranking.labels " << join(m.ranking.labels) << "\n";
  out << "lda.bias " << format_double(m.lda.bias) << "\n";
  out << "lda.count0 " << m.lda.count0 << "\n";
  out << "lda.count1 " << m.lda.count1 << "\n";
  out << "meta.chosen_k " << m.meta.chosen_k << "\n";
  out << "meta.cv_f1 " << format_double(m.meta.cv_f1) << "\n";
  out << "meta.cv_auc " << format_double(m.meta.cv_auc) << "\n";
  out << "meta.target_fpr " << format_double(m.meta.target_fpr) << "\n";
  out << "meta.onset_offset_ms " << format_double(m.meta.onset_offset_ms) << "\n";
  out << "meta.trials_used " << m.meta.trials_used << "\n";
  out << "meta.trials_rejected " << m.meta.trials_rejected << "\n";
  out << "meta.seed " << m.meta.seed << "\n";
  {
    std::vector<std::string> ks;
    for (auto k : m.meta.ks) ks.push_back(std::to_string(k));
    out << "meta.ks " << join(ks) << "\n";
  }

  Eigen::MatrixXd sections(static_cast<Eigen::Index>(m.filter.sections.size()), 5);
  for (std::size_t i = 0; i < m.filter.sections.size(); ++i) {
    const auto& s = m.filter.sections[i];
    sections.row(static_cast<Eigen::Index>(i)) << s.b0, s.b1, s.b2, s.a1, s.a2;
  }
  put_matrix(out, "filter.sections", sections);
  put_matrix(out, "lda.mean0", m.lda.mean0.transpose());
  put_matrix(out, "lda.mean1", m.lda.mean1.transpose());
  put_matrix(out, "lda.covariance", m.lda.covariance);
  put_matrix(out, "lda.weights", m.lda.weights.transpose());
  put_matrix(out, "ranking.premove_drift", row_of(m.ranking.premove_drift));
  put_matrix(out, "ranking.idle_drift", row_of(m.ranking.idle_drift));
  put_matrix(out, "meta.mean_accuracy", row_of(m.meta.mean_accuracy));
  Eigen::MatrixXd folds(static_cast<Eigen::Index>(m.meta.fold_accuracy.size()),
                        m.meta.fold_accuracy.empty()
                            ? 0
                            : static_cast<Eigen::Index>(m.meta.fold_accuracy.front().size()));
  for (Eigen::Index r = 0; r < folds.rows(); ++r) {
    for (Eigen::Index c = 0; c < folds.cols(); ++c) {
      folds(r, c) = m.meta.fold_accuracy[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  put_matrix(out, "meta.fold_accuracy", folds);
  out << "end\n";
}

IntentModel read_model(std::istream& in, Provenance* provenance) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::format, "empty model file");
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kModelMagic) fail(ErrorKind::format, "not an intentloop model file");
    if (version != kModelVersion) {
      fail(ErrorKind::format, "unsupported model version " + std::to_string(version));
    }
  }
  std::map<std::string, std::string> scalars;
  std::map<std::string, Block> blocks;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (provenance) {
        const auto body = std::string_view(line).substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
        if (const auto eq = body.find('='); eq != std::string_view::npos) {
          provenance->emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
        }
      }
      continue;
    }
    if (line == "end") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "matrix") {
      std::istringstream fields(rest);
      std::string name, payload;
      Block b;
      fields >> name >> b.rows >> b.cols;
      fields >> payload;
      const auto bytes = base64_decode(payload);
      if (bytes.size() != static_cast<std::size_t>(b.rows * b.cols) * sizeof(double)) {
        fail(ErrorKind::format, "matrix '" + name + "' has the wrong payload size");
      }
      b.values.resize(static_cast<std::size_t>(b.rows * b.cols));
      if (!bytes.empty()) std::memcpy(b.values.data(), bytes.data(), bytes.size());
      blocks[name] = std::move(b);
    } else {
      scalars[key] = rest;
    }
  }
  if (!ended) fail(ErrorKind::format, "model file is truncated");

  auto scalar = [&](const std::string& key) -> const std::string& {
    const auto it = scalars.find(key);
    if (it == scalars.end()) fail(ErrorKind::format, "model file lacks '" + key + "'");
    return it->second;
  };
  auto block = [&](const std::string& key) -> const Block& {
    const auto it = blocks.find(key);
    if (it == blocks.end()) fail(ErrorKind::format, "model file lacks matrix '" + key + "'");
    return it->second;
  };
  auto count = [&](const std::string& key) {
    return static_cast<std::size_t>(std::stoull(scalar(key)));
  };

  IntentModel m;
  m.filter.rate = parse_double(scalar("rate"));
  m.filter.low_hz = parse_double(scalar("filter.low_hz"));
  m.filter.high_hz = parse_double(scalar("filter.high_hz"));
  m.filter.order = std::stoi(scalar("filter.order"));
  const Eigen::MatrixXd sections = to_matrix(block("filter.sections"));
  if (sections.cols() != 5) fail(ErrorKind::format, "filter sections need 5 coefficients");
  for (Eigen::Index r = 0; r < sections.rows(); ++r) {
    m.filter.sections.push_back(
        {sections(r, 0), sections(r, 1), sections(r, 2), sections(r, 3), sections(r, 4)});
  }
  m.threshold = parse_double(scalar("threshold"));
  m.recording_channels = split(scalar("recording_channels"), ',');
  m.channels = split(scalar("channels"), ',');
  m.ranking.order = split(scalar("ranking.order"), ',');
  m.ranking.drift_order = split(scalar("ranking.drift_order"), ',');
  m.ranking.labels = split(scalar("ranking.labels"), ',');
  m.ranking.premove_drift = to_vector(to_matrix(block("ranking.premove_drift")));
  m.ranking.idle_drift = to_vector(to_matrix(block("ranking.idle_drift")));

  m.lda.bias = parse_double(scalar("lda.bias"));
  m.lda.count0 = count("lda.count0");
  m.lda.count1 = count("lda.count1");
  m.lda.mean0 = to_matrix(block("lda.mean0")).transpose();
  m.lda.mean1 = to_matrix(block("lda.mean1")).transpose();
  m.lda.covariance = to_matrix(block("lda.covariance"));
  m.lda.weights = to_matrix(block("lda.weights")).transpose();

  m.meta.chosen_k = count("meta.chosen_k");
  m.meta.cv_f1 = parse_double(scalar("meta.cv_f1"));
  m.meta.cv_auc = parse_double(scalar("meta.cv_auc"));
  m.meta.target_fpr = parse_double(scalar("meta.target_fpr"));
  m.meta.onset_offset_ms = parse_double(scalar("meta.onset_offset_ms"));
  m.meta.trials_used = count("meta.trials_used");
  m.meta.trials_rejected = count("meta.trials_rejected");
  m.meta.seed = std::stoull(scalar("meta.seed"));
  for (const auto& k : split(scalar("meta.ks"), ',')) m.meta.ks.push_back(std::stoull(k));
  m.meta.mean_accuracy = to_vector(to_matrix(block("meta.mean_accuracy")));
  const Eigen::MatrixXd folds = to_matrix(block("meta.fold_accuracy"));
  for (Eigen::Index r = 0; r < folds.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < folds.cols(); ++c) row.push_back(folds(r, c));
    m.meta.fold_accuracy.push_back(std::move(row));
  }

  if (m.channels.size() != count("k") || m.lda.dim() != m.channels.size()) {
    fail(ErrorKind::format, "model channel count disagrees with the LDA dimension");
  }
  if (!(m.threshold > 0.0 && m.threshold < 1.0)) {
    fail(ErrorKind::format, "model threshold outside (0, 1)");
  }
  return m;
}

void save_model(const std::filesystem::path& path, const IntentModel& model,
                const Provenance& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  write_model(out, model, provenance);
  if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

IntentModel load_model(const std::filesystem::path& path, Provenance* provenance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  return read_model(in, provenance);
}

}  // namespace intentloop
