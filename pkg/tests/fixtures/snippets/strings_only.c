const char *banner = "system update service";
const char *path = "C:\\Windows\\Temp\\svc.exe";
const char *host = "cdn.updates.example.org";
