#include "lanemap/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lanemap/error.hpp"

namespace lanemap {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
    throw ValidationError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, value);
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    bad_value(key, value);
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    std::string item;
    std::istringstream in{std::string(value)};
    while (std::getline(in, item, ',')) out.push_back(parse_number<double>(key, item));
    if (out.empty()) bad_value(key, value);
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    return out.str();
}

struct Field {
    std::function<void(PipelineConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <class T>
std::string show(const T& v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

#define LM_INT(name, expr)                                                                                    \
    {name,                                                                                                    \
     {[](PipelineConfig& c, std::string_view k, std::string_view v) { c.expr = parse_number<int>(k, v); }, \
      [](const PipelineConfig& c) { return show(c.expr); }}}
#define LM_DBL(name, expr)                                                                                       \
    {name,                                                                                                       \
     {[](PipelineConfig& c, std::string_view k, std::string_view v) { c.expr = parse_number<double>(k, v); }, \
      [](const PipelineConfig& c) { return show(c.expr); }}}
#define LM_U64(name, expr)                                                                                              \
    {name,                                                                                                              \
     {[](PipelineConfig& c, std::string_view k, std::string_view v) { c.expr = parse_number<std::uint64_t>(k, v); }, \
      [](const PipelineConfig& c) { return show(c.expr); }}}
#define LM_BOOL(name, expr)                                                                             \
    {name,                                                                                              \
     {[](PipelineConfig& c, std::string_view k, std::string_view v) { c.expr = parse_bool(k, v); }, \
      [](const PipelineConfig& c) { return std::string(c.expr ? "true" : "false"); }}}

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table = {
        LM_INT("heatmap.stride", heatmap.stride),
        LM_DBL("heatmap.sigma", heatmap.sigma),
        {"heatmap.mode",
         {[](PipelineConfig& c, std::string_view k, std::string_view v) {
              const std::string s = trim(v);
              if (s == "per_vertex") c.heatmap.mode = HeatmapMode::PerVertexChannel;
              else if (s == "shared") c.heatmap.mode = HeatmapMode::SharedChannel;
              else bad_value(k, v);
          },
          [](const PipelineConfig& c) {
              return std::string(c.heatmap.mode == HeatmapMode::PerVertexChannel ? "per_vertex" : "shared");
          }}},
        LM_INT("heatmap.c_vert", heatmap.c_vert),
        LM_DBL("heatmap.peak_threshold", heatmap.peak_threshold),
        LM_INT("match.k", match.k),
        LM_INT("match.crop_size", match.crop_size),
        LM_INT("match.c_feat", match.c_feat),
        LM_INT("match.feature_stride", match.feature_stride),
        LM_BOOL("match.use_terminal_class", match.use_terminal_class),
        LM_BOOL("match.exclude_visited", match.exclude_visited),
        LM_DBL("match.lambda1", match.lambda1),
        LM_DBL("match.lambda2", match.lambda2),
        {"eval.thresholds",
         {[](PipelineConfig& c, std::string_view k, std::string_view v) { c.eval.thresholds = parse_list(k, v); },
          [](const PipelineConfig& c) { return format_list(c.eval.thresholds); }}},
        LM_DBL("eval.sample_interval", eval.sample_interval),
        LM_U64("synth.seed", synth.seed),
        LM_INT("synth.width", synth.width),
        LM_INT("synth.height", synth.height),
        LM_INT("synth.min_lanes", synth.min_lanes),
        LM_INT("synth.max_lanes", synth.max_lanes),
        LM_DBL("synth.min_spacing", synth.min_spacing),
        LM_DBL("synth.max_spacing", synth.max_spacing),
        LM_DBL("synth.min_separation", synth.min_separation),
        LM_DBL("synth.max_curvature", synth.max_curvature),
        LM_DBL("synth.heading_spread", synth.heading_spread),
        LM_DBL("synth.noise", synth.noise),
        LM_DBL("synth.stroke_width", synth.stroke_width),
        LM_INT("train.epochs", train.epochs),
        LM_DBL("train.lr", train.lr),
        LM_INT("train.batch_size", train.batch_size),
        LM_U64("train.seed", train.seed),
        LM_BOOL("pipeline.decode_offsets", decode_offsets),
    };
    return table;
}

#undef LM_INT
#undef LM_DBL
#undef LM_U64
#undef LM_BOOL

}  // namespace

void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value) {
    const auto it = fields().find(key);
    if (it == fields().end()) {
        throw ValidationError("unknown config key '" + std::string(key) + "'");
    }
    it->second.set(cfg, key, value);
}

void apply_config_text(PipelineConfig& cfg, const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ParseError("config: " + e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ValidationError("unknown config key '" + section + "' (keys belong in a section)");
        }
        for (const auto& [key, value] : body) {
            apply_setting(cfg, section + "." + key, value.data());
        }
    }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str());
}

std::string format_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& [key, field] : fields()) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << key.substr(dot + 1) << " = " << field.get(cfg) << '\n';
    }
    return out.str();
}

}  // namespace lanemap
