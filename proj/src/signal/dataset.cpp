#include "dscodec/signal/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "dscodec/util/random.hpp"

namespace dscodec::signal {

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw SignalError(SignalError::Kind::Unreadable, manifest.string() + ": cannot open manifest");
    std::vector<std::filesystem::path> out;
    std::string line;
    const auto base = manifest.parent_path();
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::filesystem::path p(line.substr(first));
        out.push_back(p.is_absolute() ? p : base / p);
    }
    return out;
}

int configured_workers() {
    if (const char* env = std::getenv("DSCODEC_NUM_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

CropDataset::CropDataset(std::vector<Waveform> utterances, std::int64_t crop_length, std::uint64_t seed)
    : utterances_(std::move(utterances)), crop_length_(crop_length), seed_(seed) {
    if (utterances_.empty()) throw SignalError(SignalError::Kind::EmptyDataset, "dataset has no utterances");
    if (crop_length_ <= 0) throw SignalError(SignalError::Kind::InvalidConfig, "crop length must be positive");
}

CropDataset CropDataset::from_manifest(const std::filesystem::path& manifest, std::int64_t crop_length,
                                       std::uint64_t seed, const LoadOptions& opt) {
    const auto files = read_manifest(manifest);
    if (files.empty()) throw SignalError(SignalError::Kind::EmptyDataset, manifest.string() + ": empty manifest");
    std::vector<Waveform> waves(files.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            try {
                waves[i] = load_wav(files[i], opt);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int workers = std::min<int>(configured_workers(), static_cast<int>(files.size()));
    std::vector<std::thread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return CropDataset(std::move(waves), crop_length, seed);
}

double CropDataset::total_seconds() const {
    double s = 0.0;
    for (const auto& w : utterances_) s += w.seconds();
    return s;
}

std::size_t CropDataset::utterance_index(std::uint64_t epoch, std::uint64_t position) const {
    const std::size_t n = utterances_.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    util::Rng rng(util::derive_seed(seed_, 0x7065726dULL, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm[position % n];
}

std::int64_t CropDataset::crop_start(std::uint64_t epoch, std::uint64_t position) const {
    const auto& w = utterances_[utterance_index(epoch, position)];
    const auto len = static_cast<std::int64_t>(w.size());
    if (len <= crop_length_) return 0;
    util::Rng rng(util::derive_seed(seed_, epoch + 1, position + 1));
    return static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(len - crop_length_ + 1)));
}

Waveform CropDataset::random_crop(std::uint64_t epoch, std::uint64_t position) const {
    const auto& w = utterances_[utterance_index(epoch, position)];
    const std::int64_t start = crop_start(epoch, position);
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(static_cast<std::size_t>(crop_length_), 0.0);
    const std::int64_t avail = std::min<std::int64_t>(crop_length_, static_cast<std::int64_t>(w.size()) - start);
    std::copy_n(w.samples.begin() + start, avail, out.samples.begin());
    return out;
}

Waveform CropDataset::sample(std::uint64_t index) const {
    const std::uint64_t n = utterances_.size();
    return random_crop(index / n, index % n);
}

ad::Var CropDataset::batch(std::uint64_t step, std::int64_t batch_size) const {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(batch_size * crop_length_));
    for (std::int64_t b = 0; b < batch_size; ++b) {
        auto crop = sample(step * static_cast<std::uint64_t>(batch_size) + static_cast<std::uint64_t>(b));
        values.insert(values.end(), crop.samples.begin(), crop.samples.end());
    }
    return ad::Var::from({batch_size, crop_length_}, std::move(values));
}

}  // namespace dscodec::signal
