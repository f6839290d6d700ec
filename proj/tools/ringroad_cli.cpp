#include <cstdio>

int main() {
    std::printf("ringroad CLI placeholder\n");
    return 0;
}
