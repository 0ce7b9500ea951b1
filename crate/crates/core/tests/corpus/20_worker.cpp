#include <atomic>
#include <stdexcept>
#include <vector>

// Shared stop flag for all workers.
std::atomic<bool> stop{false};

int run_jobs(std::vector<int>& jobs) {
    int failed = 0;
    for (int& job : jobs) {
        if (stop.load()) {
            break;
        }
        try {
            if (job < 0) {
                throw std::runtime_error("bad job");
            }
            job *= 2;
        } catch (const std::runtime_error&) {
            ++failed;
        }
    }
    return failed;
}

void wait_for_stop() {
    int spins = 0;
    while (!stop.load()) {
        ++spins;
    }
}
