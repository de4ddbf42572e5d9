#include "pathkernel/trajectory_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace pathkernel {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic{'P', 'K', 'T', 'R', 'A', 'J', 0, '\n'};
constexpr std::array<std::uint8_t, 8> kEndMagic{'P', 'K', 'E', 'N', 'D', 0, 0, 0};

class Writer {
  public:
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(std::span<const double> v) {
        for (double x : v) f64(x);
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

  private:
    std::vector<std::uint8_t> out_;
};

class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    [[nodiscard]] std::uint64_t offset() const { return pos_; }

    void need(std::uint64_t n, const char* field) const {
        if (n > in_.size() - pos_)
            throw FormatError(std::string("truncated trajectory file while reading ") + field + " at byte " +
                                  std::to_string(pos_),
                              pos_);
    }
    /// `count` records of `size` bytes each, without overflowing.
    void need_records(std::uint64_t count, std::uint64_t size, const char* field) const {
        if (size != 0 && count > (in_.size() - pos_) / size)
            throw FormatError(std::string("truncated trajectory file while reading ") + field + " at byte " +
                                  std::to_string(pos_),
                              pos_);
    }
    void expect(std::span<const std::uint8_t> magic, const char* field) {
        need(magic.size(), field);
        if (std::memcmp(in_.data() + pos_, magic.data(), magic.size()) != 0)
            throw FormatError(std::string("bad ") + field + " at byte " + std::to_string(pos_), pos_);
        pos_ += magic.size();
    }
    std::uint8_t u8(const char* field) {
        need(1, field);
        return in_[pos_++];
    }
    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in_[pos_ + k]) << (8 * k);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* field) {
        need(8, field);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(in_[pos_ + k]) << (8 * k);
        pos_ += 8;
        return v;
    }
    std::int64_t i64(const char* field) { return static_cast<std::int64_t>(u64(field)); }
    double f64(const char* field) { return std::bit_cast<double>(u64(field)); }
    Vector f64s(std::uint64_t n, const char* field) {
        need_records(n, 8, field);
        Vector v(n);
        for (auto& x : v) x = f64(field);
        return v;
    }
    std::span<const std::uint8_t> raw(std::uint64_t n, const char* field) {
        need(n, field);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool at_end() const { return pos_ == in_.size(); }

    [[noreturn]] void fail(const std::string& what, std::uint64_t at) const {
        throw FormatError(what + " at byte " + std::to_string(at), at);
    }

  private:
    std::span<const std::uint8_t> in_;
    std::uint64_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_trajectory(const Trajectory& traj) {
    Writer w;
    const std::size_t m = traj.data.size();
    const std::size_t d = traj.num_params();
    const bool outputs = traj.has_outputs();

    w.bytes(kMagic);
    w.u32(kTrajectoryFormatVersion);
    w.u64(traj.config_hash);

    w.u8(static_cast<std::uint8_t>(traj.spec.kind));
    w.u8(static_cast<std::uint8_t>(traj.spec.activation));
    w.u8(static_cast<std::uint8_t>(traj.spec.output_activation));
    w.u32(static_cast<std::uint32_t>(traj.spec.layer_sizes.size()));
    for (std::size_t s : traj.spec.layer_sizes) w.u64(s);
    w.u32(static_cast<std::uint32_t>(traj.spec.bias.size()));
    for (bool b : traj.spec.bias) w.u8(b ? 1 : 0);

    w.u8(static_cast<std::uint8_t>(traj.loss.kind));
    w.u8(static_cast<std::uint8_t>(traj.reg.kind));
    w.f64(traj.reg.lambda);

    w.u64(m);
    w.u64(d);
    w.u64(traj.steps());
    w.u64(traj.train.checkpoint_stride);
    w.u64(traj.seed);
    w.u8(static_cast<std::uint8_t>(traj.train.mode));
    w.u64(traj.train.batch_size);
    w.u64(traj.train.minibatch_seed);
    w.f64(traj.train.epsilon);
    w.u8(outputs ? 1 : 0);
    w.u64(traj.checkpoints.size());
    w.u64(traj.spec.input_dim());

    for (const DataPoint& p : traj.data) {
        w.i64(p.index);
        w.f64(p.y_star);
        w.f64s(p.x);
    }

    const std::size_t mask_bytes = (m + 7) / 8;
    for (const Checkpoint& c : traj.checkpoints) {
        w.u64(c.step);
        w.f64(c.epsilon);
        std::vector<std::uint8_t> packed(mask_bytes, 0);
        for (std::size_t i = 0; i < m; ++i)
            if (c.mask[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        w.bytes(packed);
        w.f64s(c.w);
        if (outputs) w.f64s(c.outputs);
    }
    w.bytes(kEndMagic);
    return w.take();
}

Trajectory decode_trajectory(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.expect(kMagic, "file magic");
    const std::uint64_t version_at = r.offset();
    const std::uint32_t version = r.u32("format_version");
    if (version != kTrajectoryFormatVersion)
        r.fail("unsupported trajectory format version " + std::to_string(version) + " (expected " +
                   std::to_string(kTrajectoryFormatVersion) + ")",
               version_at);

    Trajectory traj;
    traj.config_hash = r.u64("config_hash");

    std::uint64_t at = r.offset();
    const std::uint8_t kind = r.u8("model kind");
    const std::uint8_t act = r.u8("activation");
    const std::uint8_t out_act = r.u8("output activation");
    if (kind > 1 || act > 3 || out_act > 3) r.fail("invalid model enum", at);
    traj.spec.kind = static_cast<ModelKind>(kind);
    traj.spec.activation = static_cast<Activation>(act);
    traj.spec.output_activation = static_cast<Activation>(out_act);
    const std::uint32_t n_sizes = r.u32("layer count");
    r.need_records(n_sizes, 8, "layer sizes");
    for (std::uint32_t k = 0; k < n_sizes; ++k) traj.spec.layer_sizes.push_back(r.u64("layer size"));
    const std::uint32_t n_bias = r.u32("bias count");
    r.need(n_bias, "bias flags");
    for (std::uint32_t k = 0; k < n_bias; ++k) traj.spec.bias.push_back(r.u8("bias flag") != 0);
    try {
        traj.spec.validate();
    } catch (const ConfigError& e) {
        r.fail(std::string("invalid model spec: ") + e.what(), at);
    }

    at = r.offset();
    const std::uint8_t loss_kind = r.u8("loss kind");
    const std::uint8_t reg_kind = r.u8("regularizer kind");
    if (loss_kind > 1 || reg_kind > 1) r.fail("invalid loss/regularizer enum", at);
    traj.loss.kind = static_cast<LossKind>(loss_kind);
    traj.reg.kind = static_cast<RegularizerKind>(reg_kind);
    traj.reg.lambda = r.f64("lambda");

    const std::uint64_t m = r.u64("m");
    at = r.offset();
    const std::uint64_t d = r.u64("d");
    if (d != param_count(traj.spec)) r.fail("parameter count does not match model spec", at);
    const std::uint64_t steps = r.u64("S");
    traj.train.steps = steps;
    traj.train.checkpoint_stride = r.u64("stride");
    traj.seed = r.u64("seed");
    at = r.offset();
    const std::uint8_t mode = r.u8("mode");
    if (mode > 1) r.fail("invalid batch mode", at);
    traj.train.mode = static_cast<BatchMode>(mode);
    traj.train.batch_size = r.u64("batch_size");
    traj.train.minibatch_seed = r.u64("minibatch_seed");
    traj.train.epsilon = r.f64("epsilon");
    const bool has_outputs = r.u8("has_outputs") != 0;
    traj.train.record_outputs = has_outputs;
    const std::uint64_t n_checkpoints = r.u64("checkpoint count");
    at = r.offset();
    const std::uint64_t input_dim = r.u64("input_dim");
    if (input_dim != traj.spec.input_dim()) r.fail("input dimension does not match model spec", at);

    if (input_dim > bytes.size()) r.fail("implausible input dimension", at);
    r.need_records(m, 16 + 8 * input_dim, "data points");
    traj.data.resize(m);
    for (DataPoint& p : traj.data) {
        p.index = r.i64("point index");
        p.y_star = r.f64("target");
        p.x = r.f64s(input_dim, "features");
    }

    const std::uint64_t mask_bytes = (m + 7) / 8;
    const std::uint64_t record = 16 + mask_bytes + 8 * d + (has_outputs ? 8 * m : 0);
    if (m > bytes.size() * 8 || d > bytes.size()) r.fail("implausible point or parameter count", at);
    r.need_records(n_checkpoints, record, "checkpoints");
    traj.checkpoints.resize(n_checkpoints);
    for (Checkpoint& c : traj.checkpoints) {
        c.step = r.u64("checkpoint step");
        c.epsilon = r.f64("checkpoint epsilon");
        const auto packed = r.raw(mask_bytes, "mask");
        c.mask.resize(m);
        for (std::uint64_t i = 0; i < m; ++i) c.mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
        c.w = r.f64s(d, "parameters");
        if (has_outputs) c.outputs = r.f64s(m, "outputs");
    }
    r.expect(kEndMagic, "end marker");
    if (!r.at_end()) r.fail("trailing bytes after end marker", r.offset());
    if (traj.checkpoints.empty()) r.fail("trajectory has no checkpoints", r.offset());
    if (traj.steps() != steps) r.fail("header step count does not match checkpoints", r.offset());
    return traj;
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    const auto bytes = encode_trajectory(traj);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open trajectory file " + path.string(), 0);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_trajectory(bytes);
}

}  // namespace pathkernel
