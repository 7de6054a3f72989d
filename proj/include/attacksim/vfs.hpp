#pragma once

// Per-machine filesystems layered over shared read-only templates. Writes
// create whole-file private copies; template reads go through an LRU cache.

#include "json.hpp"

#include <atomic>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace attacksim {

/// Canonical absolute path: leading '/', no empty, '.' or '..' components.
std::string normalize_path(std::string_view path);
std::string parent_path(const std::string& normalized);

/// Where template contents live. Every counted load is one "disk" access.
class BackingStore {
public:
    virtual ~BackingStore() = default;

    std::string load(const std::string& path) const {
        ++reads_;
        return load_uncounted(path);
    }
    virtual std::string load_uncounted(const std::string& path) const = 0;

    std::uint64_t reads() const { return reads_.load(); }

private:
    mutable std::atomic<std::uint64_t> reads_{0};
};

class MemoryBackingStore final : public BackingStore {
public:
    explicit MemoryBackingStore(std::map<std::string, std::string> files) : files_(std::move(files)) {}
    std::string load_uncounted(const std::string& path) const override;

private:
    std::map<std::string, std::string> files_;
};

class DirectoryBackingStore final : public BackingStore {
public:
    explicit DirectoryBackingStore(std::filesystem::path root) : root_(std::move(root)) {}
    std::string load_uncounted(const std::string& path) const override;

private:
    std::filesystem::path root_;
};

struct TemplateFileMeta {
    std::uint32_t permissions = 0644;
};

/// Immutable once constructed; shared by every machine mounting it.
class TemplateFS {
public:
    TemplateFS(std::string id, std::unique_ptr<BackingStore> store, std::map<std::string, TemplateFileMeta> files);

    static std::shared_ptr<const TemplateFS> from_files(std::string id, const std::map<std::string, std::string>& files,
                                                         std::uint32_t permissions = 0644);

    /// Loads a bundle directory. The bundle root holds a MANIFEST file with
    /// `id = <name>` and optional `permissions = <octal>` lines; every other
    /// regular file becomes a template file at its relative path.
    static std::shared_ptr<const TemplateFS> load_bundle(const std::filesystem::path& dir);

    const std::string& id() const { return id_; }
    bool has_file(const std::string& path) const { return files_.count(path) != 0; }
    bool has_dir(const std::string& path) const { return dirs_.count(path) != 0; }
    const std::map<std::string, TemplateFileMeta>& files() const { return files_; }
    std::vector<std::string> children(const std::string& dir) const;

    const BackingStore& store() const { return *store_; }

    /// FNV-1a over (path, permissions, content) of every file, uncounted.
    std::uint64_t tree_hash() const;

private:
    std::string id_;
    std::unique_ptr<BackingStore> store_;
    std::map<std::string, TemplateFileMeta> files_;
    std::set<std::string> dirs_;
};

using FileContent = std::shared_ptr<const std::string>;

struct CacheFetch {
    FileContent content;
    bool hit = false;
};

/// Most-recently-used cache of template file contents keyed by
/// (template id, path). Capacity 0 disables caching.
class FileCache {
public:
    explicit FileCache(std::size_t capacity = 1024) : capacity_(capacity) {}

    /// Throws Error(NotFound) if the template lacks the path.
    CacheFetch fetch(const TemplateFS& fs, const std::string& path);

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    bool contains(const std::string& template_id, const std::string& path) const;

private:
    using Key = std::pair<std::string, std::string>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return std::hash<std::string>{}(k.first) * 31 + std::hash<std::string>{}(k.second);
        }
    };

    std::size_t capacity_;
    std::list<std::pair<Key, FileContent>> order_;  // front = most recent
    std::unordered_map<Key, decltype(order_)::iterator, KeyHash> entries_;
    std::uint64_t hits_ = 0;
    std::uint64_t misses_ = 0;
};

class MachineFS {
public:
    MachineFS() = default;
    MachineFS(std::shared_ptr<const TemplateFS> base, FileCache* cache) : base_(std::move(base)), cache_(cache) {}

    std::string read(std::string_view path) const;
    void write(std::string_view path, std::string content);
    void remove(std::string_view path);
    void mkdir(std::string_view path);

    bool exists(std::string_view path) const;
    bool is_file(std::string_view path) const;
    bool is_dir(std::string_view path) const;
    std::vector<std::string> list(std::string_view path) const;

    const std::shared_ptr<const TemplateFS>& base() const { return base_; }
    std::size_t private_copies() const { return overlay_.size(); }
    const std::map<std::string, std::string>& overlay() const { return overlay_; }

    nlohmann::json to_json() const;
    void restore(const nlohmann::json& j);

private:
    bool hidden(const std::string& path) const;
    bool is_file_normalized(const std::string& path) const;
    bool is_dir_normalized(const std::string& path) const;

    std::shared_ptr<const TemplateFS> base_;
    FileCache* cache_ = nullptr;
    std::map<std::string, std::string> overlay_;
    std::set<std::string> overlay_dirs_;
    std::set<std::string> deleted_;
};

} // namespace attacksim
