#include <cstdio>
int main(){ std::puts("charlab"); return 0; }
