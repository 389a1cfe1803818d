/** Pure navigation state machine for the terminal.
 *
 * The graph is fixed: Login -> MainMenu -> one form -> one dialog ->
 * MainMenu. No form is reachable without a session, and no card-bound form
 * is reachable until the tray reports mutual authentication.
 */

import { CARD_BOUND, MenuOption, visibleMenu } from "./menu.js";

export type ScreenName =
  | "Login"
  | "MainMenu"
  | "PayOverCounter"
  | "AccountToAccount"
  | "CashWithdrawal"
  | "CashDeposit"
  | "AddCustomer"
  | "VerifyAccount"
  | "VerifyPIN"
  | "CancelTransaction"
  | "SuccessDialog"
  | "ErrorDialog"
  | "VerifiedDialog";

export const FORM_FOR_OPTION: Record<MenuOption, ScreenName> = {
  "Pay Over The Counter": "PayOverCounter",
  "Account To Account Transfer": "AccountToAccount",
  "Cash Withdrawal": "CashWithdrawal",
  "Cash Deposit": "CashDeposit",
  "Add Customer": "AddCustomer",
  "Verify Account": "VerifyAccount",
  "Verify PIN": "VerifyPIN",
  "Cancel Transaction": "CancelTransaction",
};

export type DialogKind = "success" | "error" | "verified";

const DIALOG_SCREEN: Record<DialogKind, ScreenName> = {
  success: "SuccessDialog",
  error: "ErrorDialog",
  verified: "VerifiedDialog",
};

export interface SessionInfo {
  account: string;
  isAdmin: boolean;
}

export interface CardInfo {
  account: string;
  cardNumber: string;
  authenticated: boolean;
  statusNote: string;
}

export interface TerminalState {
  screen: ScreenName;
  session: SessionInfo | null;
  card: CardInfo | null;
  dialog: { kind: DialogKind; text: string; retryable: boolean } | null;
}

export const INITIAL_STATE: TerminalState = {
  screen: "Login",
  session: null,
  card: null,
  dialog: null,
};

/** Both factors present: a live session and a mutually-authenticated card. */
export function transactionsEnabled(state: TerminalState): boolean {
  return state.session !== null && state.card !== null && state.card.authenticated;
}

export function menuFor(state: TerminalState): MenuOption[] {
  return state.session === null ? [] : visibleMenu(state.session.isAdmin);
}

/** Can this menu option be activated right now? Drives button disabling. */
export function optionEnabled(state: TerminalState, option: MenuOption): boolean {
  if (state.session === null) return false;
  if (option === "Add Customer" && !state.session.isAdmin) return false;
  if (CARD_BOUND.has(option) && !transactionsEnabled(state)) return false;
  return true;
}

export function loggedIn(state: TerminalState, session: SessionInfo): TerminalState {
  return { ...state, screen: "MainMenu", session, dialog: null };
}

export function sessionExpired(state: TerminalState): TerminalState {
  return { ...INITIAL_STATE, card: state.card };
}

export function loggedOut(_state: TerminalState): TerminalState {
  return { ...INITIAL_STATE };
}

export function cardInserted(state: TerminalState, card: CardInfo): TerminalState {
  return { ...state, card };
}

export function cardEjected(state: TerminalState): TerminalState {
  const screen = state.screen === "MainMenu" || state.screen === "Login"
    ? state.screen
    : "MainMenu";
  return { ...state, card: null, screen };
}

/** Open a form from the menu; refused openings leave the state unchanged. */
export function openForm(state: TerminalState, option: MenuOption): TerminalState {
  if (state.session === null) {
    return { ...state, screen: "Login" };
  }
  if (state.screen !== "MainMenu") {
    return state;
  }
  if (!optionEnabled(state, option)) {
    return state;
  }
  return { ...state, screen: FORM_FOR_OPTION[option] };
}

export function backToMenu(state: TerminalState): TerminalState {
  if (state.session === null) {
    return { ...state, screen: "Login" };
  }
  return { ...state, screen: "MainMenu", dialog: null };
}

export function dialogShown(
  state: TerminalState,
  kind: DialogKind,
  text: string,
  retryable = false,
): TerminalState {
  return { ...state, screen: DIALOG_SCREEN[kind], dialog: { kind, text, retryable } };
}

export function dialogDismissed(state: TerminalState): TerminalState {
  return backToMenu(state);
}
