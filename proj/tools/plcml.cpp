// Placeholder entry point; replaced once the experiment pipelines land.
int main() { return 0; }
