#include <fstream>
#include <iostream>
#include <string>

std::string read_all(const std::string& path) {
    std::ifstream in(path);
    std::string content, line;
    while (std::getline(in, line)) {
        content += line;
        content += '\n';
    }
    return content;
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: io <file>\n";
        return 1;
    }
    try {
        std::cout << read_all(argv[1]);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    return 0;
}
