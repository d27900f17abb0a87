package demo;

import java.util.Deque;

public class UndoStack {
    String undo(Deque<String> stack, int size) {
        if (size > 0) {
            return stack.pop();
        }
        return null;
    }
}
