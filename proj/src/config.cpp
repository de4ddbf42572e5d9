#include "pathkernel/config.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pathkernel/error.hpp"

namespace pathkernel {

using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Typed field access with "a.b.c" style diagnostics.
class Fields {
  public:
    Fields(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
    }
    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(name(key) + ": " + what);
    }
    [[nodiscard]] std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] bool has(const std::string& key) const { return node_.contains(key); }
    [[nodiscard]] const json& at(const std::string& key) const {
        if (!has(key)) fail(key, "missing required field");
        return node_.at(key);
    }
    [[nodiscard]] Fields object(const std::string& key) const { return {at(key), name(key)}; }

    [[nodiscard]] double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "expected a finite number");
        return d;
    }
    [[nodiscard]] double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
    [[nodiscard]] std::uint64_t count(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    [[nodiscard]] std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? count(key) : fallback;
    }
    [[nodiscard]] bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }
    [[nodiscard]] std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }
    [[nodiscard]] std::string string(const std::string& key, std::string fallback) const {
        return has(key) ? string(key) : fallback;
    }
    [[nodiscard]] Vector numbers(const json& v, const std::string& where) const {
        if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
        Vector out;
        for (const auto& item : v) {
            if (!item.is_number()) throw ConfigError(where + ": expected an array of numbers");
            out.push_back(item.get<double>());
        }
        return out;
    }

  private:
    const json& node_;
    std::string path_;
};

Activation parse_activation(const Fields& f, const std::string& key, Activation fallback) {
    if (!f.has(key)) return fallback;
    const std::string s = f.string(key);
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::ReLU;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    f.fail(key, "unknown activation '" + s + "' (tanh, relu, sigmoid, identity)");
}

ModelSpec parse_model(const Fields& f) {
    const std::string kind = f.string("kind");
    ModelSpec spec;
    if (kind == "linear") {
        const std::uint64_t dim = f.count("input_dim");
        spec = ModelSpec::linear(dim, f.boolean("bias", false));
    } else if (kind == "mlp") {
        const json& sizes = f.at("layer_sizes");
        if (!sizes.is_array()) f.fail("layer_sizes", "expected an array of positive integers");
        std::vector<std::size_t> layer_sizes;
        for (const auto& s : sizes) {
            if (!s.is_number_unsigned() || s.get<std::uint64_t>() == 0)
                f.fail("layer_sizes", "expected an array of positive integers");
            layer_sizes.push_back(s.get<std::size_t>());
        }
        spec = ModelSpec::mlp(std::move(layer_sizes), parse_activation(f, "activation", Activation::Tanh),
                              parse_activation(f, "output_activation", Activation::Identity));
        if (f.has("bias")) {
            const json& b = f.at("bias");
            if (b.is_boolean()) {
                spec.bias.assign(spec.bias.size(), b.get<bool>());
            } else if (b.is_array()) {
                spec.bias.clear();
                for (const auto& v : b) {
                    if (!v.is_boolean()) f.fail("bias", "expected a boolean or an array of booleans");
                    spec.bias.push_back(v.get<bool>());
                }
            } else {
                f.fail("bias", "expected a boolean or an array of booleans");
            }
        }
    } else {
        f.fail("kind", "unknown model kind '" + kind + "' (linear, mlp)");
    }
    try {
        spec.validate();
    } catch (const ConfigError& e) {
        f.fail(e.what());
    }
    return spec;
}

LossSpec parse_loss(const json& node) {
    std::string kind;
    if (node.is_string()) {
        kind = node.get<std::string>();
    } else {
        kind = Fields(node, "loss").string("kind");
    }
    if (kind == "half_squared_error") return {LossKind::HalfSquaredError};
    if (kind == "cross_entropy_prob") return {LossKind::CrossEntropyProb};
    throw ConfigError("loss.kind: unknown loss '" + kind + "' (half_squared_error, cross_entropy_prob)");
}

RegularizerSpec parse_regularizer(const Fields& f) {
    const std::string kind = f.string("kind");
    RegularizerSpec reg;
    if (kind == "none") return reg;
    if (kind != "l2") f.fail("kind", "unknown regularizer '" + kind + "' (none, l2)");
    reg.kind = RegularizerKind::L2;
    reg.lambda = f.number("lambda");
    if (reg.lambda < 0.0) f.fail("lambda", "must be >= 0");
    return reg;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<DataPoint> parse_data(const Fields& f, const std::filesystem::path& base) {
    if (f.has("csv")) return read_dataset_csv(resolve(base, f.string("csv")));
    const json& points = f.at("points");
    if (!points.is_array() || points.empty()) f.fail("points", "expected a non-empty array");
    std::vector<DataPoint> data;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Fields p(points[i], f.name("points") + "[" + std::to_string(i) + "]");
        DataPoint dp;
        dp.x = p.numbers(p.at("x"), p.name("x"));
        dp.y_star = p.number("y");
        dp.index = p.has("id") ? static_cast<std::int64_t>(p.count("id")) : static_cast<std::int64_t>(i);
        data.push_back(std::move(dp));
    }
    return data;
}

std::vector<Vector> parse_queries(const Fields& f, const std::filesystem::path& base) {
    if (f.has("csv")) return read_queries_csv(resolve(base, f.string("csv")));
    const json& points = f.at("points");
    if (!points.is_array()) f.fail("points", "expected an array of feature arrays");
    std::vector<Vector> out;
    for (std::size_t i = 0; i < points.size(); ++i)
        out.push_back(f.numbers(points[i], f.name("points") + "[" + std::to_string(i) + "]"));
    return out;
}

TrainConfig parse_train(const Fields& f, std::uint64_t seed, InitScheme& init) {
    TrainConfig cfg;
    cfg.epsilon = f.number("epsilon");
    if (!(cfg.epsilon > 0.0)) f.fail("epsilon", "must be > 0");
    cfg.steps = f.count("steps");
    cfg.checkpoint_stride = f.count("checkpoint_stride", 1);
    if (cfg.checkpoint_stride == 0) f.fail("checkpoint_stride", "must be positive");
    cfg.record_outputs = f.boolean("record_outputs", true);
    const std::string mode = f.string("mode", "batch");
    if (mode == "batch") {
        cfg.mode = BatchMode::Batch;
    } else if (mode == "minibatch") {
        cfg.mode = BatchMode::Minibatch;
        cfg.batch_size = f.count("batch_size");
        cfg.minibatch_seed = f.count("minibatch_seed", seed);
    } else {
        f.fail("mode", "unknown mode '" + mode + "' (batch, minibatch)");
    }
    const std::string scheme = f.string("init", "uniform_scaled");
    if (scheme == "zero") {
        init = InitScheme::Zero;
    } else if (scheme == "uniform_scaled") {
        init = InitScheme::UniformScaled;
    } else {
        f.fail("init", "unknown init scheme '" + scheme + "' (zero, uniform_scaled)");
    }
    return cfg;
}

void hash_doubles(std::uint64_t& h, std::span<const double> v) {
    for (double d : v) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        char buf[8];
        for (int k = 0; k < 8; ++k) buf[k] = static_cast<char>(bits >> (8 * k));
        h = fnv1a64(std::string_view(buf, 8), h);
    }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t column = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ConfigError("config syntax error at line " + std::to_string(line) + ", column " +
                          std::to_string(column) + ": " + e.what());
    }

    const Fields root(doc, "");
    ExperimentConfig cfg;
    cfg.seed = root.count("seed", 0);
    cfg.model = parse_model(root.object("model"));
    cfg.loss = root.has("loss") ? parse_loss(root.at("loss")) : LossSpec{};
    if (root.has("regularizer")) cfg.reg = parse_regularizer(root.object("regularizer"));
    cfg.data = parse_data(root.object("data"), base_dir);
    cfg.train = parse_train(root.object("train"), cfg.seed, cfg.init);
    if (root.has("queries")) cfg.queries = parse_queries(root.object("queries"), base_dir);
    cfg.output_dir = root.string("output_dir", ".");

    try {
        check_data(cfg.model, cfg.data);
    } catch (const Error& e) {
        throw ConfigError(std::string("data: ") + e.what());
    }
    for (std::size_t q = 0; q < cfg.queries.size(); ++q)
        if (cfg.queries[q].size() != cfg.model.input_dim())
            throw ConfigError("queries[" + std::to_string(q) + "]: has " + std::to_string(cfg.queries[q].size()) +
                              " features, model expects " + std::to_string(cfg.model.input_dim()));
    try {
        cfg.train.validate(cfg.data.size());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }

    std::uint64_t h = fnv1a64(doc.dump());
    for (const auto& p : cfg.data) {
        hash_doubles(h, p.x);
        hash_doubles(h, std::span<const double>(&p.y_star, 1));
    }
    for (const auto& q : cfg.queries) hash_doubles(h, q);
    cfg.hash = h;
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

double parse_float(std::string_view text) {
    const std::string_view t = trim(text);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (!t.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ConfigError("invalid number '" + std::string(t) + "'");
    return v;
}

Vector parse_float_list(std::string_view text) {
    Vector out;
    for (std::string_view item : split(text, ',')) out.push_back(parse_float(item));
    return out;
}

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<Vector> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    CsvTable table;
    std::size_t line_no = 0;
    for (std::string_view line : split(text, '\n')) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        if (table.header.empty()) {
            for (std::string_view h : split(line, ',')) table.header.emplace_back(trim(h));
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != table.header.size())
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size()) + " columns, got " + std::to_string(cells.size()));
        Vector row;
        for (std::string_view c : cells) {
            try {
                row.push_back(parse_float(c));
            } catch (const ConfigError& e) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw ConfigError(path.string() + ": empty CSV file");
    return table;
}

void check_feature_header(const CsvTable& t, std::size_t features, const std::filesystem::path& path) {
    for (std::size_t j = 0; j < features; ++j)
        if (t.header[j] != "x" + std::to_string(j))
            throw ConfigError(path.string() + ":1: column " + std::to_string(j) + " must be named x" +
                              std::to_string(j) + ", got '" + t.header[j] + "'");
}

}  // namespace

std::vector<DataPoint> read_dataset_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 2 || t.header.back() != "y")
        throw ConfigError(path.string() + ":1: header must be x0..x{n-1},y");
    check_feature_header(t, t.header.size() - 1, path);
    std::vector<DataPoint> data;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        DataPoint p;
        p.x.assign(t.rows[r].begin(), t.rows[r].end() - 1);
        p.y_star = t.rows[r].back();
        p.index = static_cast<std::int64_t>(r);
        data.push_back(std::move(p));
    }
    if (data.empty()) throw ConfigError(path.string() + ": dataset has no rows");
    return data;
}

std::vector<Vector> read_queries_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    check_feature_header(t, t.header.size(), path);
    return t.rows;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k, v >>= 4) s[static_cast<std::size_t>(k)] = digits[v & 0xf];
    return s;
}

}  // namespace pathkernel
