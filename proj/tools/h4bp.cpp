// placeholder while the library comes up; replaced by the real CLI
int main() { return 0; }
