/** Transient toasts and a persistent per-screen error banner. */

export const TOAST_MS = 4000;

function toastHost(): HTMLElement {
  let host = document.getElementById("toasts");
  if (!host) {
    host = document.createElement("div");
    host.id = "toasts";
    document.body.appendChild(host);
  }
  return host;
}

export function showToast(message: string): void {
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = message;
  toastHost().appendChild(el);
  setTimeout(() => el.remove(), TOAST_MS);
}

/** Replace the screen's banner with message + a retry button. */
export function showBanner(
  container: HTMLElement,
  message: string,
  onRetry: () => void,
): void {
  clearBanner(container);
  const banner = document.createElement("div");
  banner.className = "banner";
  const text = document.createElement("span");
  text.textContent = message;
  const retry = document.createElement("button");
  retry.textContent = "retry";
  retry.addEventListener("click", onRetry);
  banner.appendChild(text);
  banner.appendChild(retry);
  container.prepend(banner);
}

export function clearBanner(container: HTMLElement): void {
  container.querySelector(":scope > .banner")?.remove();
}
