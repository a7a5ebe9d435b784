#include "beesense/ingest/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "beesense/error.hpp"

namespace beesense::ingest {
namespace {

const std::vector<std::string>& health_tokens() {
    static const std::vector<std::string> names = {"healthy", "ant_infestation", "missing_queen",
                                                   "pesticide_exposure"};
    return names;
}

const std::vector<std::string>& detection_tokens() {
    static const std::vector<std::string> names = {"no_bee", "bee"};
    return names;
}

const std::vector<std::string>& tokens(LabelSet set) {
    return set == LabelSet::Health ? health_tokens() : detection_tokens();
}

std::optional<std::pair<LabelSet, int>> lookup_label(const std::string& token) {
    for (LabelSet set : {LabelSet::Health, LabelSet::Detection}) {
        const auto& names = tokens(set);
        auto it = std::find(names.begin(), names.end(), token);
        if (it != names.end()) {
            return std::make_pair(set, static_cast<int>(it - names.begin()));
        }
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(HealthLabel label) {
    return health_tokens().at(static_cast<std::size_t>(label));
}

std::vector<std::string> class_names(LabelSet set) { return tokens(set); }

std::size_t class_count(LabelSet set) { return tokens(set).size(); }

std::vector<std::size_t> DatasetManifest::class_counts() const {
    std::vector<std::size_t> counts(class_count(label_set), 0);
    for (const auto& e : entries) {
        ++counts.at(static_cast<std::size_t>(e.label));
    }
    return counts;
}

std::vector<std::string> DatasetManifest::ids() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back(e.id);
    }
    return out;
}

const ManifestEntry& DatasetManifest::find(std::string_view id) const {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.id == id; });
    if (it == entries.end()) {
        fail(ErrorKind::Data, "id not in manifest: " + std::string(id));
    }
    return *it;
}

DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& root) {
    DatasetManifest manifest;
    manifest.root = root;
    std::optional<LabelSet> set;
    std::set<std::string> seen;

    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream fields(line);
        std::vector<std::string> parts;
        for (std::string f; fields >> f;) {
            parts.push_back(f);
        }
        if (parts.empty()) {
            continue;
        }
        const std::string where = "manifest line " + std::to_string(line_no);
        if (parts.size() != 4) {
            fail(ErrorKind::Parse, where + ": expected 4 fields (id image audio label)");
        }
        if (parts == std::vector<std::string>{"id", "image", "audio", "label"}) {
            continue;
        }
        ManifestEntry entry;
        entry.id = parts[0];
        if (parts[1] != "-") {
            entry.image = parts[1];
        }
        if (parts[2] != "-") {
            entry.audio = parts[2];
        }
        if (!entry.image && !entry.audio) {
            fail(ErrorKind::Data, where + ": entry '" + entry.id + "' has no modality");
        }
        const auto label = lookup_label(parts[3]);
        if (!label) {
            fail(ErrorKind::Parse, where + ": unknown label '" + parts[3] + "'");
        }
        if (set && *set != label->first) {
            fail(ErrorKind::Data, where + ": label '" + parts[3] + "' mixes label vocabularies");
        }
        set = label->first;
        entry.label = label->second;
        if (!seen.insert(entry.id).second) {
            fail(ErrorKind::Data, where + ": duplicate id '" + entry.id + "'");
        }
        manifest.entries.push_back(std::move(entry));
    }
    manifest.label_set = set.value_or(LabelSet::Health);
    return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        fail(ErrorKind::Io, "cannot open manifest " + path.string());
    }
    std::stringstream ss;
    ss << file.rdbuf();
    return parse_manifest(ss.str(), path.parent_path());
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << "id image audio label\n";
    const auto& names = tokens(manifest.label_set);
    for (const auto& e : manifest.entries) {
        out << e.id << ' ' << (e.image ? e.image->generic_string() : "-") << ' '
            << (e.audio ? e.audio->generic_string() : "-") << ' '
            << names.at(static_cast<std::size_t>(e.label)) << '\n';
    }
    return out.str();
}

}  // namespace beesense::ingest
