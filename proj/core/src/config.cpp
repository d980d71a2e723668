#include "metasel/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace metasel {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad numeric value for " + key + ": " + v);
    }
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::invalid_argument("config: bad integer value for " + key + ": " + v);
    }
}

}  // namespace

SelectionMethod selection_method_from_name(const std::string& name) {
    if (name == "rbc") return SelectionMethod::Rbc;
    if (name == "gbc") return SelectionMethod::Gbc;
    if (name == "random") return SelectionMethod::Random;
    if (name == "certain") return SelectionMethod::Certain;
    if (name == "uncertain") return SelectionMethod::Uncertain;
    if (name == "plain_kmeans") return SelectionMethod::PlainKmeans;
    if (name == "finetune") return SelectionMethod::Finetune;
    throw std::invalid_argument("config: unknown selection method: " + name);
}

std::string selection_method_name(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::Rbc: return "rbc";
        case SelectionMethod::Gbc: return "gbc";
        case SelectionMethod::Random: return "random";
        case SelectionMethod::Certain: return "certain";
        case SelectionMethod::Uncertain: return "uncertain";
        case SelectionMethod::PlainKmeans: return "plain_kmeans";
        case SelectionMethod::Finetune: return "finetune";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    train.check();
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
    if (budget < warmup_size) throw std::invalid_argument("config: budget must be >= warmup size (M0)");
    if (dataset_kind == DatasetKind::Idx && (idx_images.empty() || idx_labels.empty()))
        throw std::invalid_argument("config: idx dataset needs images and labels paths");
    if (noise_kind != "none" && noise_kind != "uniform" && noise_kind != "adversarial")
        throw std::invalid_argument("config: unknown noise kind: " + noise_kind);
    if (label_mode != "auto" && label_mode != "full" && label_mode != "label_free")
        throw std::invalid_argument("config: unknown label mode: " + label_mode);
    if (imbalance_factor < 1.0) throw std::invalid_argument("config: imbalance factor >= 1");
}

GradMode ExperimentConfig::feature_mode() const {
    if (label_mode == "full") return GradMode::Full;
    if (label_mode == "label_free") return GradMode::LabelFree;
    // auto: label-free under label noise, full otherwise (imbalance / clean runs)
    return noise_kind == "none" ? GradMode::Full : GradMode::LabelFree;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));

        if (key == "dataset.kind") {
            if (value == "toy")
                cfg.dataset_kind = DatasetKind::Toy;
            else if (value == "idx")
                cfg.dataset_kind = DatasetKind::Idx;
            else
                throw std::invalid_argument("config: unknown dataset kind: " + value);
        } else if (key == "dataset.n") {
            cfg.toy_n = std::size_t(to_int(key, value));
        } else if (key == "dataset.sigma") {
            cfg.toy_sigma = to_double(key, value);
        } else if (key == "dataset.images") {
            cfg.idx_images = value;
        } else if (key == "dataset.labels") {
            cfg.idx_labels = value;
        } else if (key == "dataset.limit") {
            cfg.idx_limit = std::size_t(to_int(key, value));
        } else if (key == "dataset.train_fraction") {
            cfg.fractions.train = to_double(key, value);
        } else if (key == "dataset.validation_fraction") {
            cfg.fractions.validation = to_double(key, value);
        } else if (key == "dataset.test_fraction") {
            cfg.fractions.test = to_double(key, value);
        } else if (key == "noise.kind") {
            cfg.noise_kind = value;
        } else if (key == "noise.percent") {
            cfg.noise_percent = to_double(key, value);
        } else if (key == "imbalance.factor") {
            cfg.imbalance_factor = to_double(key, value);
        } else if (key == "arch.hidden") {
            cfg.arch.hidden.clear();
            for (const auto& h : split_list(value)) cfg.arch.hidden.push_back(std::size_t(to_int(key, h)));
        } else if (key == "arch.activation") {
            if (value == "relu")
                cfg.arch.act = Activation::Relu;
            else if (value == "tanh")
                cfg.arch.act = Activation::Tanh;
            else
                throw std::invalid_argument("config: unknown activation: " + value);
        } else if (key == "train.lr") {
            cfg.train.lr = to_double(key, value);
        } else if (key == "train.weight_lr") {
            cfg.train.weight_lr = to_double(key, value);
        } else if (key == "train.momentum") {
            cfg.train.momentum = to_double(key, value);
        } else if (key == "train.weight_decay") {
            cfg.train.weight_decay = to_double(key, value);
        } else if (key == "train.batch_size") {
            cfg.train.batch_size = std::size_t(to_int(key, value));
        } else if (key == "train.epochs") {
            cfg.train.epochs = int(to_int(key, value));
        } else if (key == "train.rule") {
            if (value == "shu")
                cfg.train.rule = WeightRule::Shu;
            else if (value == "ren")
                cfg.train.rule = WeightRule::Ren;
            else
                throw std::invalid_argument("config: unknown weight rule: " + value);
        } else if (key == "train.weight_init") {
            cfg.train.weight_init = to_double(key, value);
        } else if (key == "train.full_batch") {
            cfg.train.full_batch = value == "true" || value == "1";
        } else if (key == "select.methods") {
            cfg.methods.clear();
            for (const auto& m : split_list(value)) cfg.methods.push_back(selection_method_from_name(m));
        } else if (key == "select.budget") {
            cfg.budget = std::size_t(to_int(key, value));
        } else if (key == "select.m0") {
            cfg.warmup_size = std::size_t(to_int(key, value));
        } else if (key == "select.checkpoints") {
            cfg.checkpoints = std::size_t(to_int(key, value));
        } else if (key == "select.layer_draws") {
            cfg.layer_draws = std::size_t(to_int(key, value));
        } else if (key == "select.keep_fraction") {
            cfg.keep_fraction = to_double(key, value);
        } else if (key == "select.label_mode") {
            cfg.label_mode = value;
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& s : split_list(value)) cfg.seeds.push_back(std::uint64_t(to_int(key, s)));
        } else if (key == "out") {
            cfg.out_dir = value;
        } else {
            throw std::invalid_argument("config: unknown key: " + key);
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "dataset.kind = " << (cfg.dataset_kind == DatasetKind::Toy ? "toy" : "idx") << "\n";
    out << "dataset.n = " << cfg.toy_n << "\n";
    out << "dataset.sigma = " << cfg.toy_sigma << "\n";
    if (!cfg.idx_images.empty()) out << "dataset.images = " << cfg.idx_images << "\n";
    if (!cfg.idx_labels.empty()) out << "dataset.labels = " << cfg.idx_labels << "\n";
    out << "dataset.limit = " << cfg.idx_limit << "\n";
    out << "dataset.train_fraction = " << cfg.fractions.train << "\n";
    out << "dataset.validation_fraction = " << cfg.fractions.validation << "\n";
    out << "dataset.test_fraction = " << cfg.fractions.test << "\n";
    out << "noise.kind = " << cfg.noise_kind << "\n";
    out << "noise.percent = " << cfg.noise_percent << "\n";
    out << "imbalance.factor = " << cfg.imbalance_factor << "\n";
    out << "arch.hidden = ";
    for (std::size_t i = 0; i < cfg.arch.hidden.size(); ++i)
        out << (i ? "," : "") << cfg.arch.hidden[i];
    out << "\n";
    out << "arch.activation = " << (cfg.arch.act == Activation::Relu ? "relu" : "tanh") << "\n";
    out << "train.lr = " << cfg.train.lr << "\n";
    out << "train.weight_lr = " << cfg.train.weight_lr << "\n";
    out << "train.momentum = " << cfg.train.momentum << "\n";
    out << "train.weight_decay = " << cfg.train.weight_decay << "\n";
    out << "train.batch_size = " << cfg.train.batch_size << "\n";
    out << "train.epochs = " << cfg.train.epochs << "\n";
    out << "train.rule = " << (cfg.train.rule == WeightRule::Shu ? "shu" : "ren") << "\n";
    out << "train.weight_init = " << cfg.train.weight_init << "\n";
    out << "train.full_batch = " << (cfg.train.full_batch ? "true" : "false") << "\n";
    out << "select.methods = ";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        out << (i ? "," : "") << selection_method_name(cfg.methods[i]);
    out << "\n";
    out << "select.budget = " << cfg.budget << "\n";
    out << "select.m0 = " << cfg.warmup_size << "\n";
    out << "select.checkpoints = " << cfg.checkpoints << "\n";
    out << "select.layer_draws = " << cfg.layer_draws << "\n";
    out << "select.keep_fraction = " << cfg.keep_fraction << "\n";
    out << "select.label_mode = " << cfg.label_mode << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "out = " << cfg.out_dir << "\n";
    return out.str();
}

}  // namespace metasel
