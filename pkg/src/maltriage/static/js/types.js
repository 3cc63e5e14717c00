// Wire types for the /api endpoints. Labels are a closed set; the UI
// must never show or send anything outside it.
export const LABELS = ["malware", "benign", "partially_malicious"];
export function labelDisplay(label) {
    return label === null ? "—" : label.replace(/_/g, " ").toUpperCase();
}
