#include "attacksim/vfs.hpp"

#include "attacksim/error.hpp"

#include <fstream>
#include <sstream>

namespace attacksim {

namespace fs = std::filesystem;

std::string normalize_path(std::string_view path) {
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i <= path.size()) {
        auto slash = path.find('/', i);
        if (slash == std::string_view::npos) slash = path.size();
        auto part = path.substr(i, slash - i);
        if (part == "..") {
            if (!parts.empty()) parts.pop_back();
        } else if (!part.empty() && part != ".") {
            parts.push_back(part);
        }
        i = slash + 1;
    }
    std::string out;
    for (auto p : parts) {
        out.push_back('/');
        out.append(p);
    }
    return out.empty() ? "/" : out;
}

std::string parent_path(const std::string& normalized) {
    auto slash = normalized.rfind('/');
    if (slash == 0 || slash == std::string::npos) return "/";
    return normalized.substr(0, slash);
}

std::string MemoryBackingStore::load_uncounted(const std::string& path) const {
    auto it = files_.find(path);
    if (it == files_.end()) throw Error(ErrorCode::NotFound, path);
    return it->second;
}

std::string DirectoryBackingStore::load_uncounted(const std::string& path) const {
    std::ifstream in(root_ / path.substr(1), std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, path);
    std::ostringstream content;
    content << in.rdbuf();
    return content.str();
}

TemplateFS::TemplateFS(std::string id, std::unique_ptr<BackingStore> store, std::map<std::string, TemplateFileMeta> files)
    : id_(std::move(id)), store_(std::move(store)), files_(std::move(files)) {
    dirs_.insert("/");
    for (const auto& [path, meta] : files_) {
        for (auto dir = parent_path(path); dir != "/"; dir = parent_path(dir)) dirs_.insert(dir);
    }
}

std::shared_ptr<const TemplateFS> TemplateFS::from_files(std::string id, const std::map<std::string, std::string>& files,
                                                        std::uint32_t permissions) {
    std::map<std::string, std::string> normalized;
    std::map<std::string, TemplateFileMeta> meta;
    for (const auto& [path, content] : files) {
        auto p = normalize_path(path);
        normalized[p] = content;
        meta[p] = TemplateFileMeta{permissions};
    }
    return std::make_shared<const TemplateFS>(std::move(id), std::make_unique<MemoryBackingStore>(std::move(normalized)),
                                              std::move(meta));
}

std::shared_ptr<const TemplateFS> TemplateFS::load_bundle(const fs::path& dir) {
    std::ifstream manifest(dir / "MANIFEST");
    if (!manifest) throw Error(ErrorCode::NotFound, "template bundle without MANIFEST: " + dir.string());
    std::string id;
    std::uint32_t permissions = 0644;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value in MANIFEST", line_no, 1);
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key == "id") {
            id = value;
        } else if (key == "permissions") {
            permissions = static_cast<std::uint32_t>(std::stoul(value, nullptr, 8));
        } else {
            throw ParseError("unknown MANIFEST key '" + key + "'", line_no, 1);
        }
    }
    if (id.empty()) throw ParseError("MANIFEST lacks an id", line_no, 1);

    std::map<std::string, TemplateFileMeta> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto rel = fs::relative(entry.path(), dir).generic_string();
        if (rel == "MANIFEST") continue;
        files[normalize_path(rel)] = TemplateFileMeta{permissions};
    }
    return std::make_shared<const TemplateFS>(id, std::make_unique<DirectoryBackingStore>(dir), std::move(files));
}

std::vector<std::string> TemplateFS::children(const std::string& dir) const {
    std::set<std::string> names;
    std::string prefix = dir == "/" ? "/" : dir + "/";
    auto collect = [&](const std::string& path) {
        if (path.size() <= prefix.size() || path.compare(0, prefix.size(), prefix) != 0) return;
        auto rest = path.substr(prefix.size());
        names.insert(rest.substr(0, rest.find('/')));
    };
    for (auto it = files_.lower_bound(prefix); it != files_.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it)
        collect(it->first);
    for (auto it = dirs_.lower_bound(prefix); it != dirs_.end() && it->compare(0, prefix.size(), prefix) == 0; ++it)
        collect(*it);
    return {names.begin(), names.end()};
}

std::uint64_t TemplateFS::tree_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](std::string_view bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= 0xff;
        h *= 0x100000001b3ull;
    };
    for (const auto& [path, meta] : files_) {
        mix(path);
        mix(std::to_string(meta.permissions));
        mix(store_->load_uncounted(path));
    }
    return h;
}

CacheFetch FileCache::fetch(const TemplateFS& fs, const std::string& path) {
    if (!fs.has_file(path)) throw Error(ErrorCode::NotFound, path);
    Key key{fs.id(), path};
    if (capacity_ > 0) {
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            ++hits_;
            order_.splice(order_.begin(), order_, it->second);
            return {it->second->second, true};
        }
    }
    ++misses_;
    auto content = std::make_shared<const std::string>(fs.store().load(path));
    if (capacity_ == 0) return {content, false};
    if (entries_.size() >= capacity_) {
        entries_.erase(order_.back().first);
        order_.pop_back();
    }
    order_.emplace_front(key, content);
    entries_[key] = order_.begin();
    return {content, false};
}

bool FileCache::contains(const std::string& template_id, const std::string& path) const {
    return entries_.count(Key{template_id, path}) != 0;
}

bool MachineFS::hidden(const std::string& path) const {
    if (deleted_.empty()) return false;
    for (std::string p = path;; p = parent_path(p)) {
        if (deleted_.count(p)) return true;
        if (p == "/") return false;
    }
}

bool MachineFS::is_file_normalized(const std::string& p) const {
    if (hidden(p)) return false;
    return overlay_.count(p) || (base_ && base_->has_file(p));
}

bool MachineFS::is_dir_normalized(const std::string& p) const {
    if (p == "/") return true;
    if (hidden(p)) return false;
    return overlay_dirs_.count(p) || (base_ && base_->has_dir(p));
}

std::string MachineFS::read(std::string_view path) const {
    auto p = normalize_path(path);
    if (hidden(p)) throw Error(ErrorCode::NotFound, p);
    if (auto it = overlay_.find(p); it != overlay_.end()) return it->second;
    if (!base_ || !base_->has_file(p)) throw Error(ErrorCode::NotFound, p);
    if (cache_) return *cache_->fetch(*base_, p).content;
    return base_->store().load(p);
}

void MachineFS::write(std::string_view path, std::string content) {
    auto p = normalize_path(path);
    if (p == "/" || is_dir_normalized(p)) throw Error(ErrorCode::NotFound, p + " is a directory");
    if (!is_dir_normalized(parent_path(p))) throw Error(ErrorCode::NotFound, "no directory " + parent_path(p));
    overlay_[p] = std::move(content);
    deleted_.erase(p);
}

void MachineFS::remove(std::string_view path) {
    auto p = normalize_path(path);
    bool file = is_file_normalized(p);
    bool dir = is_dir_normalized(p);
    if ((!file && !dir) || p == "/") throw Error(ErrorCode::NotFound, p);
    overlay_.erase(p);
    if (dir) {
        auto prefix = p + "/";
        for (auto it = overlay_.lower_bound(prefix); it != overlay_.end() && it->first.compare(0, prefix.size(), prefix) == 0;)
            it = overlay_.erase(it);
        for (auto it = overlay_dirs_.lower_bound(p); it != overlay_dirs_.end() &&
                                                     (*it == p || it->compare(0, prefix.size(), prefix) == 0);)
            it = overlay_dirs_.erase(it);
    }
    if (base_ && (base_->has_file(p) || base_->has_dir(p))) deleted_.insert(p);
}

void MachineFS::mkdir(std::string_view path) {
    auto p = normalize_path(path);
    if (is_dir_normalized(p) || is_file_normalized(p)) return;
    if (!is_dir_normalized(parent_path(p))) throw Error(ErrorCode::NotFound, "no directory " + parent_path(p));
    overlay_dirs_.insert(p);
    deleted_.erase(p);
}

bool MachineFS::exists(std::string_view path) const {
    auto p = normalize_path(path);
    return is_file_normalized(p) || is_dir_normalized(p);
}

bool MachineFS::is_file(std::string_view path) const { return is_file_normalized(normalize_path(path)); }
bool MachineFS::is_dir(std::string_view path) const { return is_dir_normalized(normalize_path(path)); }

std::vector<std::string> MachineFS::list(std::string_view path) const {
    auto p = normalize_path(path);
    if (!is_dir_normalized(p)) throw Error(ErrorCode::NotFound, p);
    std::set<std::string> names;
    if (base_) {
        for (auto& name : base_->children(p)) {
            auto child = p == "/" ? "/" + name : p + "/" + name;
            if (!hidden(child)) names.insert(name);
        }
    }
    std::string prefix = p == "/" ? "/" : p + "/";
    auto take = [&](const std::string& entry) {
        if (entry.size() <= prefix.size() || entry.compare(0, prefix.size(), prefix) != 0) return;
        auto rest = entry.substr(prefix.size());
        if (rest.find('/') == std::string::npos) names.insert(rest);
    };
    for (const auto& [entry, content] : overlay_) take(entry);
    for (const auto& entry : overlay_dirs_) take(entry);
    return {names.begin(), names.end()};
}

namespace {

std::string to_hex(const std::string& bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 15]);
    }
    return out;
}

std::string from_hex(const std::string& hex) {
    if (hex.size() % 2) throw Error(ErrorCode::Parse, "odd-length hex content");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw Error(ErrorCode::Parse, "bad hex digit");
    };
    std::string out(hex.size() / 2, '\0');
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<char>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
    return out;
}

} // namespace

// File contents are hex-encoded: simulated processes may write arbitrary bytes.
nlohmann::json MachineFS::to_json() const {
    nlohmann::json overlay = nlohmann::json::object();
    for (const auto& [path, content] : overlay_) overlay[path] = to_hex(content);
    return {{"overlay", overlay}, {"dirs", overlay_dirs_}, {"deleted", deleted_}};
}

void MachineFS::restore(const nlohmann::json& j) {
    overlay_.clear();
    for (const auto& [path, hex] : j.at("overlay").items()) overlay_[path] = from_hex(hex.get<std::string>());
    overlay_dirs_ = j.at("dirs").get<std::set<std::string>>();
    deleted_ = j.at("deleted").get<std::set<std::string>>();
}

} // namespace attacksim
