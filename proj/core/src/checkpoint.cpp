#include <bit>
#include <fstream>
#include <json.hpp>

#include "splat4d/train.hpp"

namespace splat4d {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint arrays are little-endian float32");

namespace {

constexpr const char* kMagic = "SPLAT4D-CKPT v1";

json config_to_json(const TrainConfig& c) {
    json j;
    j["iterations"] = c.iterations;
    j["lambda_ssim"] = c.lambda_ssim;
    j["lr_position"] = c.lr_position;
    j["lr_scale"] = c.lr_scale;
    j["lr_quat"] = c.lr_quat;
    j["lr_opacity"] = c.lr_opacity;
    j["lr_sh"] = c.lr_sh;
    j["lr_embed"] = c.lr_embed;
    j["lr_temporal"] = c.lr_temporal;
    j["lr_deform"] = c.lr_deform;
    j["lr_pose"] = c.lr_pose;
    j["pos_bands"] = c.pos_bands;
    j["temporal_dim"] = c.temporal_dim;
    j["gauss_dim"] = c.gauss_dim;
    j["n_min"] = c.n_min;
    j["n_max"] = c.n_max;
    j["head_width"] = c.head_width;
    j["head_depth"] = c.head_depth;
    j["fine_gain"] = c.fine_gain;
    j["position_scale"] = c.position_scale;
    j["init_position_noise"] = c.init_position_noise;
    j["init_opacity"] = c.init_opacity;
    j["init_scale"] = c.init_scale;
    j["init_embed_sigma"] = c.init_embed_sigma;
    j["seed"] = c.seed;
    j["mode"] = c.mode;
    j["split"] = c.split;
    j["strict_sequential"] = c.strict_sequential;
    j["switches"] = {{"gauss_embed", c.switches.use_gauss_embed},
                     {"temporal", c.switches.use_temporal},
                     {"coarse", c.switches.use_coarse},
                     {"fine", c.switches.use_fine}};
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.iterations = j.at("iterations").get<long>();
    c.lambda_ssim = j.at("lambda_ssim").get<double>();
    c.lr_position = j.at("lr_position").get<double>();
    c.lr_scale = j.at("lr_scale").get<double>();
    c.lr_quat = j.at("lr_quat").get<double>();
    c.lr_opacity = j.at("lr_opacity").get<double>();
    c.lr_sh = j.at("lr_sh").get<double>();
    c.lr_embed = j.at("lr_embed").get<double>();
    c.lr_temporal = j.at("lr_temporal").get<double>();
    c.lr_deform = j.at("lr_deform").get<double>();
    c.lr_pose = j.at("lr_pose").get<double>();
    c.pos_bands = j.at("pos_bands").get<int>();
    c.temporal_dim = j.at("temporal_dim").get<int>();
    c.gauss_dim = j.at("gauss_dim").get<int>();
    c.n_min = j.at("n_min").get<int>();
    c.n_max = j.at("n_max").get<int>();
    c.head_width = j.at("head_width").get<int>();
    c.head_depth = j.at("head_depth").get<int>();
    c.fine_gain = j.at("fine_gain").get<double>();
    c.position_scale = j.at("position_scale").get<double>();
    c.init_position_noise = j.at("init_position_noise").get<double>();
    c.init_opacity = j.at("init_opacity").get<double>();
    c.init_scale = j.at("init_scale").get<double>();
    c.init_embed_sigma = j.at("init_embed_sigma").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mode = j.at("mode").get<std::string>();
    c.split = j.at("split").get<std::string>();
    c.strict_sequential = j.at("strict_sequential").get<bool>();
    c.switches.use_gauss_embed = j.at("switches").at("gauss_embed").get<bool>();
    c.switches.use_temporal = j.at("switches").at("temporal").get<bool>();
    c.switches.use_coarse = j.at("switches").at("coarse").get<bool>();
    c.switches.use_fine = j.at("switches").at("fine").get<bool>();
    return c;
}

void write_f32(std::ofstream& out, const double* data, Eigen::Index n) {
    std::vector<float> buf(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) buf[i] = static_cast<float>(data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_f32(std::ifstream& in, double* data, Eigen::Index n,
              const std::string& name) {
    std::vector<float> buf(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw FormatError("checkpoint: truncated array '" + name + "'");
    for (Eigen::Index i = 0; i < n; ++i) data[i] = buf[i];
}

} // namespace

void save_checkpoint(const Trainer& t, const std::filesystem::path& path) {
    json header;
    header["magic"] = kMagic;
    header["version"] = 1;
    header["iteration"] = t.iteration_;
    header["dataset"] = t.dataset_.root.string();
    header["config"] = config_to_json(t.config_);
    json arrays = json::array();
    json steps = json::array();
    for (const auto& tensor : t.registry_) {
        arrays.push_back({{"name", tensor.name}, {"count", tensor.size}});
        arrays.push_back({{"name", tensor.name + ".m"}, {"count", tensor.size}});
        arrays.push_back({{"name", tensor.name + ".v"}, {"count", tensor.size}});
        steps.push_back(tensor.state.step);
    }
    header["arrays"] = arrays;
    header["adam_steps"] = steps;

    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint: " + path.string());
    out << kMagic << "\n" << text.size() << "\n" << text;
    for (const auto& tensor : t.registry_) {
        write_f32(out, tensor.data, tensor.size);
        write_f32(out, tensor.state.m.data(), tensor.size);
        write_f32(out, tensor.state.v.data(), tensor.size);
    }
    if (!out) throw FormatError("short checkpoint write: " + path.string());
}

std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path,
                                         const Dataset& dataset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path.string());
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic)
        throw FormatError("not a checkpoint (bad magic): " + path.string());
    std::string len_line;
    std::getline(in, len_line);
    size_t header_len = 0;
    try {
        header_len = std::stoul(len_line);
    } catch (...) {
        throw FormatError("corrupt checkpoint header length: " + path.string());
    }
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw FormatError("truncated checkpoint header: " + path.string());

    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header parse error: " + std::string(e.what()));
    }

    TrainConfig config;
    long iteration = 0;
    try {
        if (header.at("version").get<int>() != 1)
            throw FormatError("unsupported checkpoint version");
        config = config_from_json(header.at("config"));
        iteration = header.at("iteration").get<long>();
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header field error: " + std::string(e.what()));
    }

    auto trainer = std::make_unique<Trainer>(dataset, config);
    const auto& arrays = header.at("arrays");
    const auto& steps = header.at("adam_steps");
    if (arrays.size() != trainer->registry_.size() * 3 ||
        steps.size() != trainer->registry_.size())
        throw FormatError("checkpoint layout does not match this dataset/config");
    for (size_t i = 0; i < trainer->registry_.size(); ++i) {
        auto& tensor = trainer->registry_[i];
        const auto& a = arrays[3 * i];
        if (a.at("name").get<std::string>() != tensor.name ||
            a.at("count").get<Eigen::Index>() != tensor.size)
            throw FormatError("checkpoint tensor mismatch at '" + tensor.name + "'");
        read_f32(in, tensor.data, tensor.size, tensor.name);
        read_f32(in, tensor.state.m.data(), tensor.size, tensor.name + ".m");
        read_f32(in, tensor.state.v.data(), tensor.size, tensor.name + ".v");
        tensor.state.step = steps[i].get<std::int64_t>();
    }
    trainer->iteration_ = iteration;
    // replay the sampling stream up to the stored iteration
    trainer->sampler_.seed(config.seed);
    for (long i = 0; i < iteration; ++i) trainer->sampler_();
    return trainer;
}

} // namespace splat4d
