#include "underq/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace underq::mdp {

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void save_dataset(const OfflineDataset& ds, std::ostream& out) {
    if (ds.empty()) throw std::invalid_argument("refusing to save empty dataset");
    out << "underq-dataset v1, " << ds.state_dim << ", " << ds.action_dim
        << ", discrete:" << (ds.discrete ? 1 : 0) << ", " << ds.records.size()
        << ", " << ds.seed << "\n";
    for (const auto& rec : ds.records) {
        if (rec.state.size() != ds.state_dim ||
            rec.next_state.size() != ds.state_dim ||
            rec.action.size() != ds.action_dim)
            throw std::invalid_argument("record dimensionality mismatch");
        for (Eigen::Index i = 0; i < rec.state.size(); ++i)
            out << format_real(rec.state[i]) << ", ";
        for (Eigen::Index i = 0; i < rec.action.size(); ++i)
            out << format_real(rec.action[i]) << ", ";
        out << format_real(rec.reward) << ", ";
        for (Eigen::Index i = 0; i < rec.next_state.size(); ++i)
            out << format_real(rec.next_state[i]) << ", ";
        out << (rec.done ? 1 : 0) << "\n";
    }
}

void save_dataset(const OfflineDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    save_dataset(ds, f);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        std::size_t b = pos, e = comma;
        while (b < e && line[b] == ' ') ++b;
        while (e > b && line[e - 1] == ' ') --e;
        out.push_back(line.substr(b, e - b));
        pos = comma + 1;
        if (comma == line.size()) break;
    }
    return out;
}

double parse_real(const std::string& tok) {
    double v;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        throw std::runtime_error("bad numeric field: " + tok);
    return v;
}

}  // namespace

OfflineDataset load_dataset(std::istream& in) {
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("missing dataset header");
    const auto h = split_csv(header);
    if (h.size() != 6 || h[0] != "underq-dataset v1")
        throw std::runtime_error("unrecognized dataset header");
    OfflineDataset ds;
    ds.state_dim = static_cast<int>(parse_real(h[1]));
    ds.action_dim = static_cast<int>(parse_real(h[2]));
    if (h[3].rfind("discrete:", 0) != 0)
        throw std::runtime_error("bad discrete field");
    ds.discrete = h[3].back() == '1';
    const auto count = static_cast<std::size_t>(parse_real(h[4]));
    ds.seed = static_cast<std::uint64_t>(parse_real(h[5]));
    ds.generator = "loaded";

    const std::size_t fields =
        2 * static_cast<std::size_t>(ds.state_dim) +
        static_cast<std::size_t>(ds.action_dim) + 2;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tok = split_csv(line);
        if (tok.size() != fields)
            throw std::runtime_error("record field count mismatch");
        TransitionRecord rec;
        std::size_t k = 0;
        rec.state.resize(ds.state_dim);
        for (int i = 0; i < ds.state_dim; ++i) rec.state[i] = parse_real(tok[k++]);
        rec.action.resize(ds.action_dim);
        for (int i = 0; i < ds.action_dim; ++i)
            rec.action[i] = parse_real(tok[k++]);
        rec.reward = parse_real(tok[k++]);
        rec.next_state.resize(ds.state_dim);
        for (int i = 0; i < ds.state_dim; ++i)
            rec.next_state[i] = parse_real(tok[k++]);
        rec.done = tok[k] == "1";
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.size() != count)
        throw std::runtime_error("dataset record count mismatch");
    return ds;
}

OfflineDataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return load_dataset(f);
}

}  // namespace underq::mdp
