#include <map>
#include <string>

class Cache {
public:
    const std::string* get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);

private:
    std::map<std::string, std::string> entries_;
    static const int kLimit = 64;
};

const std::string* Cache::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return nullptr;
    }
    return &it->second;
}

void Cache::put(const std::string& key, const std::string& value) {
    if (entries_.size() >= kLimit) {
        entries_.erase(entries_.begin());
    }
    entries_[key] = value;
}
