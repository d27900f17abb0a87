package demo;

import java.io.InputStream;
import java.util.Scanner;

public class InputSummer {
    int sum(InputStream in) {
        Scanner sc = new Scanner(in);
        int total = 0;
        total += sc.nextInt();
        total += sc.nextInt();
        return total;
    }
}
