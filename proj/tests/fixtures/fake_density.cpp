// Test double for the external density protocol.
// Usage: fake_density <mode> [marker-file]
//   ok        logf = -10 |x - 0.5|^2
//   nan       replies with a NaN logf
//   text      replies with a non-numeric logf
//   badid     replies with the wrong id
//   hang      never replies
//   die       exits on the first request
//   die_once  exits on the first request if the marker file is absent (creating it)
//   slow      like ok, after a 50 ms pause

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "ok";
    const std::string marker = argc > 2 ? argv[2] : "";
    const char* dim = std::getenv("MED_DENSITY_DIM");
    std::string line;
    while (std::getline(std::cin, line)) {
        auto req = nlohmann::json::parse(line);
        long long id = req.at("id").get<long long>();
        double acc = 0.0;
        for (double v : req.at("x")) acc += (v - 0.5) * (v - 0.5);
        if (dim && req.at("x").size() != static_cast<std::size_t>(std::atoi(dim))) return 4;
        nlohmann::json resp{{"id", id}, {"logf", -10.0 * acc}};
        if (mode == "nan") {
            std::cout << "{\"id\": " << id << ", \"logf\": NaN}" << std::endl;
            continue;
        }
        if (mode == "text") resp["logf"] = "high";
        if (mode == "badid") resp["id"] = id + 1000;
        if (mode == "hang") std::this_thread::sleep_for(std::chrono::hours(1));
        if (mode == "die") return 1;
        if (mode == "die_once" && !marker.empty()) {
            std::ifstream probe(marker);
            if (!probe) {
                std::ofstream(marker) << "x";
                return 1;
            }
        }
        if (mode == "slow") std::this_thread::sleep_for(std::chrono::milliseconds(50));
        std::cout << resp.dump() << std::endl;
    }
    return 0;
}
