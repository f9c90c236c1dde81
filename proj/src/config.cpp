// config.cpp

#include "uct/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace uct {

void LossWeights::validate() const {
    for (double v : {lambda_penalties, lambda_bam, lambda_feature, lambda_classifier, lambda_adv,
                     lambda_rec})
        if (v < 0.0) throw InvalidArgument("loss weights must be >= 0");
}

void RunConfig::validate() const {
    weights.validate();
    aaspm.validate();
    if (width < 8) throw InvalidArgument("model.width must be >= 8");
    if (depth < 1) throw InvalidArgument("model.depth must be >= 1");
    if (image_size < 16 || image_size % (1 << std::max(depth, disc_blocks)) != 0)
        throw InvalidArgument("train.image_size must be >= 16 and divisible by 2^depth");
    if (iters < 1) throw InvalidArgument("train.iters must be >= 1");
    if (batch < 1) throw InvalidArgument("train.batch must be >= 1");
    if (lr <= 0.0) throw InvalidArgument("train.lr must be > 0");
    if (rho < 0.0 || rho > 1.0) throw InvalidArgument("train.rho must be in [0,1]");
    if (crop_min <= 0.0 || crop_max > 1.0 || crop_min > crop_max)
        throw InvalidArgument("train.crop range must lie within (0,1]");
    if (ablation.lca) filter.validate_enabled();
    if (synth_n < 1) throw InvalidArgument("synth.n must be >= 1");
    if (synth_opacity_fraction < 0.0 || synth_opacity_fraction > 1.0)
        throw InvalidArgument("synth.opacity_fraction must be in [0,1]");
    if (phantom_train_count < 2) throw InvalidArgument("data.phantom_train_count must be >= 2");
    if (kid_subset_size < 2 || kid_n_subsets < 1 || embed_dim < 1)
        throw InvalidArgument("eval parameters out of range");
}

namespace {

std::string bool_str(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw InvalidArgument("config: invalid boolean for " + key + ": " + v);
}

std::vector<int> parse_binary_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "0")
            out.push_back(0);
        else if (tok == "1")
            out.push_back(1);
        else
            throw InvalidArgument("config: " + key + " must be a comma list of 0/1");
    }
    if (out.empty()) throw InvalidArgument("config: " + key + " is empty");
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "[run]\n";
    os << "seed = " << seed << "\n";
    os << "out = " << out << "\n\n";
    os << "[data]\n";
    os << "opacity_dir = " << opacity_dir << "\n";
    os << "nonopacity_dir = " << nonopacity_dir << "\n";
    os << "phantom_train_count = " << phantom_train_count << "\n";
    os << "phantom_max_blobs = " << phantom_max_blobs << "\n\n";
    os << "[model]\n";
    os << "width = " << width << "\n";
    os << "depth = " << depth << "\n";
    os << "n_res = " << n_res << "\n";
    os << "disc_width = " << disc_width << "\n";
    os << "disc_blocks = " << disc_blocks << "\n\n";
    os << "[train]\n";
    os << "image_size = " << image_size << "\n";
    os << "iters = " << iters << "\n";
    os << "batch = " << batch << "\n";
    os << "lr = " << lr << "\n";
    os << "rho = " << rho << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "log_every = " << log_every << "\n";
    os << "augment = " << bool_str(augment) << "\n";
    os << "crop_min = " << crop_min << "\n";
    os << "crop_max = " << crop_max << "\n\n";
    os << "[ablation]\n";
    os << "aaspm = " << bool_str(ablation.aaspm) << "\n";
    os << "fa = " << bool_str(ablation.fa) << "\n";
    os << "lca = " << bool_str(ablation.lca) << "\n";
    os << "baml = " << bool_str(ablation.baml) << "\n\n";
    os << "[aaspm]\n";
    os << "f_upper = " << aaspm.f_upper << "\n";
    os << "f_central = " << aaspm.f_central << "\n";
    os << "f_height = " << aaspm.f_height << "\n";
    os << "epsilon = " << aaspm.epsilon << "\n";
    os << "normalize = " << bool_str(aaspm.normalize) << "\n\n";
    os << "[cdam]\n";
    os << "lambda_style = " << lambda_style << "\n";
    os << "threshold_p = " << filter.threshold_p << "\n";
    os << "q = ";
    for (std::size_t i = 0; i < filter.q.size(); ++i) os << (i ? "," : "") << filter.q[i];
    os << "\n";
    os << "hard_inversion = " << bool_str(hard_inversion) << "\n";
    os << "classifier_width = " << classifier_width << "\n";
    os << "classifier_target_accuracy = " << classifier_target_accuracy << "\n\n";
    os << "[adv]\n";
    os << "loss_form = "
       << (adv_loss_form == AdvLossForm::LeastSquares ? "least_squares" : "hinge") << "\n\n";
    os << "[weights]\n";
    os << "lambda_penalties = " << weights.lambda_penalties << "\n";
    os << "lambda_bam = " << weights.lambda_bam << "\n";
    os << "lambda_feature = " << weights.lambda_feature << "\n";
    os << "lambda_classifier = " << weights.lambda_classifier << "\n";
    os << "lambda_adv = " << weights.lambda_adv << "\n";
    os << "lambda_rec = " << weights.lambda_rec << "\n\n";
    os << "[synth]\n";
    os << "n = " << synth_n << "\n";
    os << "opacity_fraction = " << synth_opacity_fraction << "\n\n";
    os << "[eval]\n";
    os << "kid_subset_size = " << kid_subset_size << "\n";
    os << "kid_n_subsets = " << kid_n_subsets << "\n";
    os << "embed_dim = " << embed_dim << "\n";
    return os.str();
}

RunConfig preset_config(const std::string& name) {
    RunConfig c;  // defaults are the desk preset
    if (name == "desk") return c;
    if (name == "paper") {
        c.image_size = 512;
        c.iters = 250000;
        c.batch = 2;
        c.lr = 1e-4;
        c.width = 32;
        c.depth = 2;
        c.n_res = 4;
        c.disc_width = 32;
        c.checkpoint_every = 10000;
        // six opacity-associated labels out of the 14 CheXpert-style outputs
        c.filter.q = {0, 0, 1, 1, 1, 0, 1, 0, 1, 1, 0, 0, 0, 0};
        return c;
    }
    throw InvalidArgument("unknown preset: " + name + " (expected desk or paper)");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    RunConfig c = std::move(base);
    using Setter = std::function<void(const std::string&)>;
    std::map<std::string, Setter> setters;
    auto set_u64 = [](std::uint64_t& dst) {
        return [&dst](const std::string& v) { dst = std::stoull(v); };
    };
    auto set_int = [](int& dst) {
        return [&dst](const std::string& v) { dst = std::stoi(v); };
    };
    auto set_dbl = [](double& dst) {
        return [&dst](const std::string& v) { dst = std::stod(v); };
    };
    auto set_str = [](std::string& dst) {
        return [&dst](const std::string& v) { dst = v; };
    };
    auto set_bool = [](bool& dst, std::string key) {
        return [&dst, key](const std::string& v) { dst = parse_bool(v, key); };
    };

    setters["run.seed"] = set_u64(c.seed);
    setters["run.out"] = set_str(c.out);
    setters["data.opacity_dir"] = set_str(c.opacity_dir);
    setters["data.nonopacity_dir"] = set_str(c.nonopacity_dir);
    setters["data.phantom_train_count"] = set_int(c.phantom_train_count);
    setters["data.phantom_max_blobs"] = set_int(c.phantom_max_blobs);
    setters["model.width"] = set_int(c.width);
    setters["model.depth"] = set_int(c.depth);
    setters["model.n_res"] = set_int(c.n_res);
    setters["model.disc_width"] = set_int(c.disc_width);
    setters["model.disc_blocks"] = set_int(c.disc_blocks);
    setters["train.image_size"] = set_int(c.image_size);
    setters["train.iters"] = set_int(c.iters);
    setters["train.batch"] = set_int(c.batch);
    setters["train.lr"] = set_dbl(c.lr);
    setters["train.rho"] = set_dbl(c.rho);
    setters["train.checkpoint_every"] = set_int(c.checkpoint_every);
    setters["train.log_every"] = set_int(c.log_every);
    setters["train.augment"] = set_bool(c.augment, "train.augment");
    setters["train.crop_min"] = set_dbl(c.crop_min);
    setters["train.crop_max"] = set_dbl(c.crop_max);
    setters["ablation.aaspm"] = set_bool(c.ablation.aaspm, "ablation.aaspm");
    setters["ablation.fa"] = set_bool(c.ablation.fa, "ablation.fa");
    setters["ablation.lca"] = set_bool(c.ablation.lca, "ablation.lca");
    setters["ablation.baml"] = set_bool(c.ablation.baml, "ablation.baml");
    setters["aaspm.f_upper"] = set_dbl(c.aaspm.f_upper);
    setters["aaspm.f_central"] = set_dbl(c.aaspm.f_central);
    setters["aaspm.f_height"] = set_dbl(c.aaspm.f_height);
    setters["aaspm.epsilon"] = set_dbl(c.aaspm.epsilon);
    setters["aaspm.normalize"] = set_bool(c.aaspm.normalize, "aaspm.normalize");
    setters["cdam.lambda_style"] = set_dbl(c.lambda_style);
    setters["cdam.threshold_p"] = set_dbl(c.filter.threshold_p);
    setters["cdam.q"] = [&c](const std::string& v) { c.filter.q = parse_binary_list(v, "cdam.q"); };
    setters["cdam.hard_inversion"] = set_bool(c.hard_inversion, "cdam.hard_inversion");
    setters["cdam.classifier_width"] = set_int(c.classifier_width);
    setters["cdam.classifier_target_accuracy"] = set_dbl(c.classifier_target_accuracy);
    setters["adv.loss_form"] = [&c](const std::string& v) {
        c.adv_loss_form = adv_loss_form_from_string(v);
    };
    setters["weights.lambda_penalties"] = set_dbl(c.weights.lambda_penalties);
    setters["weights.lambda_bam"] = set_dbl(c.weights.lambda_bam);
    setters["weights.lambda_feature"] = set_dbl(c.weights.lambda_feature);
    setters["weights.lambda_classifier"] = set_dbl(c.weights.lambda_classifier);
    setters["weights.lambda_adv"] = set_dbl(c.weights.lambda_adv);
    setters["weights.lambda_rec"] = set_dbl(c.weights.lambda_rec);
    setters["synth.n"] = set_int(c.synth_n);
    setters["synth.opacity_fraction"] = set_dbl(c.synth_opacity_fraction);
    setters["eval.kid_subset_size"] = set_int(c.kid_subset_size);
    setters["eval.kid_n_subsets"] = set_int(c.kid_n_subsets);
    setters["eval.embed_dim"] = set_int(c.embed_dim);

    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw InvalidArgument("config line " + std::to_string(lineno) + ": bad section");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        std::string full = section.empty() ? key : section + "." + key;
        auto it = setters.find(full);
        if (it == setters.end())
            throw InvalidArgument("config line " + std::to_string(lineno) + ": unknown key " + full);
        try {
            it->second(val);
        } catch (const InvalidArgument&) {
            throw;
        } catch (const std::exception&) {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": bad value for " +
                                  full + ": " + val);
        }
    }
    return c;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), std::move(base));
}

}  // namespace uct
