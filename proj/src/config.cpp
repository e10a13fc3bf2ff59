#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include "coordnet/csv.hpp"
#include "coordnet/pipeline.hpp"
#include "coordnet/util.hpp"

namespace coordnet {

namespace {

using C = PipelineConfig;
using FieldPtr = std::variant<std::string C::*, bool C::*, double C::*, int C::*, std::uint64_t C::*,
                              std::vector<double> C::*>;

struct Field {
  const char* section;
  const char* key;
  FieldPtr ptr;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"paths", "corpus", &C::corpus},
      {"paths", "seeds", &C::seeds},
      {"paths", "cache_dir", &C::cache_dir},
      {"paths", "output_dir", &C::output_dir},
      {"ingest", "strict", &C::strict},
      {"toxicity", "mode", &C::toxicity_mode},
      {"toxicity", "endpoint", &C::endpoint},
      {"toxicity", "api_key_env", &C::api_key_env},
      {"toxicity", "max_qps", &C::max_qps},
      {"toxicity", "max_retries", &C::max_retries},
      {"toxicity", "batch_concurrency", &C::batch_concurrency},
      {"toxicity", "backoff_seconds", &C::backoff_seconds},
      {"coordination", "superspreader_fraction", &C::superspreader_fraction},
      {"coordination", "backbone_alpha", &C::backbone_alpha},
      {"leaning", "alpha_start", &C::alpha_start},
      {"leaning", "alpha_end", &C::alpha_end},
      {"leaning", "alpha_steps", &C::alpha_steps},
      {"metrics", "top_fraction", &C::top_fraction},
      {"metrics", "min_activity", &C::min_activity},
      {"sequences", "toxic_threshold", &C::toxic_threshold},
      {"sequences", "replicates", &C::sequence_replicates},
      {"stats", "bootstrap_replicates", &C::bootstrap_replicates},
      {"stats", "spearman_replicates", &C::spearman_replicates},
      {"stats", "shuffles", &C::shuffles},
      {"stats", "ad_simulations", &C::ad_simulations},
      {"stats", "loess_span", &C::loess_span},
      {"stats", "clusters", &C::clusters},
      {"te", "q", &C::te_q},
      {"te", "history", &C::te_history},
      {"te", "bootstraps", &C::te_bootstraps},
      {"te", "probs", &C::te_probs},
      {"report", "joint_bins", &C::joint_bins},
      {"report", "svg", &C::svg},
      {"run", "seed", &C::seed},
  };
  return table;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string render(const PipelineConfig& c, const FieldPtr& ptr) {
  return std::visit(
      [&](auto p) -> std::string {
        using T = std::remove_cvref_t<decltype(c.*p)>;
        const T& v = c.*p;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return csv::format_double(v);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          std::string s;
          for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + csv::format_double(v[i]);
          return s;
        } else {
          return std::to_string(v);
        }
      },
      ptr);
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw DomainError("not an integer: '" + std::string(s) + "'");
  return v;
}

void assign(PipelineConfig& c, const FieldPtr& ptr, std::string_view value) {
  std::visit(
      [&](auto p) {
        using T = std::remove_cvref_t<decltype(c.*p)>;
        T& v = c.*p;
        if constexpr (std::is_same_v<T, std::string>) {
          v = std::string(value);
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true")
            v = true;
          else if (value == "false")
            v = false;
          else
            throw DomainError("expected true or false, got '" + std::string(value) + "'");
        } else if constexpr (std::is_same_v<T, double>) {
          v = csv::parse_double(value);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          v.clear();
          for (const auto& item : csv::split_line(std::string(value))) v.push_back(csv::parse_double(trim(item)));
        } else {
          v = parse_int<T>(value);
        }
      },
      ptr);
}

}  // namespace

bool PipelineConfig::operator==(const PipelineConfig& other) const {
  return serialize_config(*this) == serialize_config(other);
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("config: ") + what);
  };
  require(!corpus.empty() && !seeds.empty() && !cache_dir.empty() && !output_dir.empty(), "paths must be nonempty");
  require(toxicity_mode == "remote" || toxicity_mode == "offline", "toxicity.mode must be remote or offline");
  require(max_qps > 0.0, "toxicity.max_qps must be positive");
  require(max_retries >= 0, "toxicity.max_retries must be nonnegative");
  require(batch_concurrency >= 1, "toxicity.batch_concurrency must be at least 1");
  require(backoff_seconds >= 0.0, "toxicity.backoff_seconds must be nonnegative");
  require(superspreader_fraction > 0.0 && superspreader_fraction <= 1.0,
          "coordination.superspreader_fraction must be in (0,1]");
  require(backbone_alpha > 0.0 && backbone_alpha <= 1.0, "coordination.backbone_alpha must be in (0,1]");
  require(alpha_start > 0.0 && alpha_start < alpha_end && alpha_end <= 1.0,
          "leaning needs 0 < alpha_start < alpha_end <= 1");
  require(alpha_steps >= 2, "leaning.alpha_steps must be at least 2");
  require(top_fraction > 0.0 && top_fraction <= 1.0, "metrics.top_fraction must be in (0,1]");
  require(min_activity >= 1, "metrics.min_activity must be at least 1");
  require(toxic_threshold >= 0.0 && toxic_threshold <= 1.0, "sequences.toxic_threshold must be in [0,1]");
  require(sequence_replicates >= 1, "sequences.replicates must be positive");
  require(bootstrap_replicates >= 1, "stats.bootstrap_replicates must be positive");
  require(spearman_replicates >= 1, "stats.spearman_replicates must be positive");
  require(shuffles >= 2, "stats.shuffles must be at least 2");
  require(ad_simulations >= 1, "stats.ad_simulations must be positive");
  require(loess_span > 0.0 && loess_span <= 1.0, "stats.loess_span must be in (0,1]");
  require(clusters >= 1, "stats.clusters must be at least 1");
  require(te_q > 0.0 && te_q != 1.0, "te.q must be positive and not 1");
  require(te_history >= 1, "te.history must be at least 1");
  require(te_bootstraps >= 1, "te.bootstraps must be positive");
  require(!te_probs.empty(), "te.probs must be nonempty");
  for (std::size_t i = 0; i < te_probs.size(); ++i) {
    require(te_probs[i] > 0.0 && te_probs[i] < 1.0, "te.probs must lie in (0,1)");
    require(i == 0 || te_probs[i] > te_probs[i - 1], "te.probs must be strictly increasing");
  }
  require(joint_bins >= 1, "report.joint_bins must be positive");
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig c;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& f : fields()) known = known || section == f.section;
      if (!known) throw ParseError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (section == f.section && key == f.key) field = &f;
    if (!field) throw ParseError("unknown key '" + std::string(key) + "' in [" + section + "]", line_no);
    try {
      assign(c, field->ptr, value);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(std::string(key) + ": " + e.what(), line_no);
    }
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  auto c = parse_config(read_file(path));
  c.base_dir = std::filesystem::absolute(path).parent_path();
  c.validate();
  return c;
}

std::string serialize_config(const PipelineConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + render(config, f.ptr) + "\n";
  }
  return out;
}

}  // namespace coordnet
