#include <windows.h>
int load_into(HANDLE process, const char *dll_path) {
    LPVOID remote = VirtualAllocEx(process, NULL, strlen(dll_path) + 1, MEM_COMMIT, PAGE_READWRITE);
    WriteProcessMemory(process, remote, dll_path, strlen(dll_path) + 1, NULL);
    HANDLE t = CreateRemoteThread(process, NULL, 0,
        (LPTHREAD_START_ROUTINE)GetProcAddress(GetModuleHandleA("kernel32"), "LoadLibraryA"),
        remote, 0, NULL);
    WaitForSingleObject(t, INFINITE);
    return 0;
}
