#include "rigsplat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace rigsplat {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'S', 'P', 'L', 'A', 'T', 'C', 'K'};

enum Tag : std::uint32_t {
    kConfig = 1,
    kRig = 2,
    kModelFlags = 3,
    kGaussians = 4,
    kAdjuster = 5,
    kOptim = 6,
    kStats = 7,
    kIteration = 8,
    kRng = 9,
};

class Writer {
public:
    template <typename T>
    void pod(const T &v) {
        const auto *p = reinterpret_cast<const unsigned char *>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void str(const std::string &s) {
        pod<std::uint64_t>(s.size());
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    template <typename T>
    void vec(const std::vector<T> &v) {
        pod<std::uint64_t>(v.size());
        const auto *p = reinterpret_cast<const unsigned char *>(v.data());
        bytes.insert(bytes.end(), p, p + v.size() * sizeof(T));
    }
    void section(std::uint32_t tag, const Writer &payload) {
        pod(tag);
        pod<std::uint64_t>(payload.bytes.size());
        bytes.insert(bytes.end(), payload.bytes.begin(), payload.bytes.end());
    }
    std::vector<unsigned char> bytes;
};

class Reader {
public:
    Reader(std::span<const unsigned char> data, std::string what) : data_(data), what_(std::move(what)) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint64_t>();
        need(n);
        std::string s(reinterpret_cast<const char *>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    template <typename T>
    std::vector<T> vec() {
        const auto n = pod<std::uint64_t>();
        if (n > (data_.size() - pos_) / sizeof(T)) {
            throw LoadError("checkpoint: truncated " + what_);
        }
        std::vector<T> v(n);
        std::memcpy(v.data(), data_.data() + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return v;
    }
    std::span<const unsigned char> take(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) {
            throw LoadError("checkpoint: truncated " + what_);
        }
    }
    std::span<const unsigned char> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

template <typename T>
void assign_checked(std::vector<double> &dst, std::vector<T> src, const char *what) {
    if (src.size() != dst.size()) {
        throw LoadError(std::string("checkpoint: ") + what + " has " + std::to_string(src.size()) +
                        " values, expected " + std::to_string(dst.size()));
    }
    dst = std::move(src);
}

} // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint &ckpt) {
    const Model &m = ckpt.model;
    Writer out;
    out.bytes.insert(out.bytes.end(), std::begin(kMagic), std::end(kMagic));
    out.pod(kCheckpointVersion);

    Writer config;
    config.str(config_to_json(ckpt.config));
    out.section(kConfig, config);

    Writer rig;
    std::ostringstream rig_text;
    write_rig(rig_text, m.rig);
    rig.str(rig_text.str());
    out.section(kRig, rig);

    Writer flags;
    flags.pod<std::uint8_t>(m.adjuster_enabled);
    flags.pod<std::uint8_t>(m.adjuster_active);
    flags.pod<std::uint8_t>(m.use_lbs);
    for (int c = 0; c < 3; ++c) {
        flags.pod(m.background[c]);
    }
    out.section(kModelFlags, flags);

    Writer gauss;
    gauss.pod<std::int32_t>(m.gaussians.sh_degree());
    gauss.vec(m.gaussians.position);
    gauss.vec(m.gaussians.rotation);
    gauss.vec(m.gaussians.log_scale);
    gauss.vec(m.gaussians.opacity_logit);
    gauss.vec(m.gaussians.sh);
    gauss.vec(m.gaussians.parent_tri);
    out.section(kGaussians, gauss);

    Writer adj;
    adj.pod<std::uint8_t>(m.adjuster.config().encoding == EncodingMode::triplane ? 0 : 1);
    for (int c = 0; c < 3; ++c) {
        adj.pod(m.adjuster.domain().min[c]);
    }
    for (int c = 0; c < 3; ++c) {
        adj.pod(m.adjuster.domain().max[c]);
    }
    adj.vec(m.adjuster.triplane.params);
    adj.vec(m.adjuster.basis_net.params);
    adj.vec(m.adjuster.latent_net.params);
    out.section(kAdjuster, adj);

    Writer opt;
    opt.pod(ckpt.optim.beta1);
    opt.pod(ckpt.optim.beta2);
    opt.pod(ckpt.optim.eps);
    opt.pod<std::uint64_t>(ckpt.optim.groups.size());
    for (const auto &[name, g] : ckpt.optim.groups) {
        opt.str(name);
        opt.pod<std::int64_t>(g.step);
        opt.vec(g.m);
        opt.vec(g.v);
    }
    out.section(kOptim, opt);

    Writer stats;
    stats.vec(ckpt.stats.grad_norm_sum);
    stats.vec(ckpt.stats.count);
    out.section(kStats, stats);

    Writer iter;
    iter.pod<std::int64_t>(ckpt.iteration);
    out.section(kIteration, iter);

    Writer rng;
    rng.str(ckpt.rng_state);
    out.section(kRng, rng);
    return out.bytes;
}

Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes) {
    Reader header(bytes, "header");
    const auto magic = header.take(sizeof(kMagic));
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
        throw LoadError("checkpoint: bad magic, not a checkpoint file");
    }
    const auto version = header.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw LoadError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    std::map<std::uint32_t, std::span<const unsigned char>> sections;
    while (!header.done()) {
        const auto tag = header.pod<std::uint32_t>();
        const auto len = header.pod<std::uint64_t>();
        sections[tag] = header.take(len);
    }
    auto section = [&](Tag tag, const char *name) {
        auto it = sections.find(tag);
        if (it == sections.end()) {
            throw LoadError(std::string("checkpoint: missing section ") + name);
        }
        return Reader(it->second, name);
    };

    Checkpoint ck;
    ck.config = config_from_json(section(kConfig, "config").str());

    Model &m = ck.model;
    {
        std::istringstream rig_text(section(kRig, "rig").str());
        m.rig = read_rig(rig_text);
    }
    {
        Reader r = section(kModelFlags, "model flags");
        m.adjuster_enabled = r.pod<std::uint8_t>() != 0;
        m.adjuster_active = r.pod<std::uint8_t>() != 0;
        m.use_lbs = r.pod<std::uint8_t>() != 0;
        for (int c = 0; c < 3; ++c) {
            m.background[c] = r.pod<double>();
        }
    }
    m.render_options = ck.config.render;
    m.render_options.threads = ck.config.threads;
    m.refresh_neutral();
    {
        Reader r = section(kGaussians, "gaussians");
        const auto degree = r.pod<std::int32_t>();
        if (degree < 0 || degree > 3) {
            throw LoadError("checkpoint: invalid SH degree");
        }
        m.gaussians = GaussianSet(degree);
        GaussianSet &g = m.gaussians;
        g.position = r.vec<double>();
        g.rotation = r.vec<double>();
        g.log_scale = r.vec<double>();
        g.opacity_logit = r.vec<double>();
        g.sh = r.vec<double>();
        g.parent_tri = r.vec<int>();
        const std::size_t n = g.parent_tri.size();
        if (g.position.size() != 3 * n || g.rotation.size() != 4 * n || g.log_scale.size() != 3 * n ||
            g.opacity_logit.size() != n || g.sh.size() != n * static_cast<std::size_t>(g.sh_stride())) {
            throw LoadError("checkpoint: inconsistent Gaussian arrays");
        }
        try {
            g.validate(m.rig.face_count());
        } catch (const Error &e) {
            throw LoadError(std::string("checkpoint: ") + e.what());
        }
    }
    {
        Reader r = section(kAdjuster, "adjuster");
        AdjusterConfig ac = ck.config.adjuster;
        ac.encoding = r.pod<std::uint8_t>() == 0 ? EncodingMode::triplane : EncodingMode::fourier;
        Aabb domain;
        for (int c = 0; c < 3; ++c) {
            domain.min[c] = r.pod<double>();
        }
        for (int c = 0; c < 3; ++c) {
            domain.max[c] = r.pod<double>();
        }
        const int driving = static_cast<int>(m.rig.expression_dim() + 3 * m.rig.joint_count());
        m.adjuster = MorphAdjuster(ac, domain, driving);
        assign_checked(m.adjuster.triplane.params, r.vec<double>(), "tri-plane");
        assign_checked(m.adjuster.basis_net.params, r.vec<double>(), "basis network");
        assign_checked(m.adjuster.latent_net.params, r.vec<double>(), "latent network");
    }
    {
        Reader r = section(kOptim, "optimizer");
        ck.optim.beta1 = r.pod<double>();
        ck.optim.beta2 = r.pod<double>();
        ck.optim.eps = r.pod<double>();
        const auto count = r.pod<std::uint64_t>();
        for (std::uint64_t k = 0; k < count; ++k) {
            const std::string name = r.str();
            AdamMoments mom;
            mom.step = static_cast<long>(r.pod<std::int64_t>());
            mom.m = r.vec<double>();
            mom.v = r.vec<double>();
            if (mom.m.size() != mom.v.size()) {
                throw LoadError("checkpoint: optimizer moments of '" + name + "' differ in size");
            }
            ck.optim.groups[name] = std::move(mom);
        }
    }
    {
        Reader r = section(kStats, "densification stats");
        ck.stats.grad_norm_sum = r.vec<double>();
        ck.stats.count = r.vec<int>();
        if (ck.stats.grad_norm_sum.size() != ck.stats.count.size()) {
            throw LoadError("checkpoint: densification stats differ in size");
        }
    }
    ck.iteration = static_cast<long>(section(kIteration, "iteration").pod<std::int64_t>());
    ck.rng_state = section(kRng, "rng").str();
    return ck;
}

void save_checkpoint(const std::string &path, const Checkpoint &ckpt) {
    const std::vector<unsigned char> bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw LoadError("cannot write checkpoint " + path);
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw LoadError("failed writing checkpoint " + path);
    }
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open checkpoint " + path);
    }
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

} // namespace rigsplat
